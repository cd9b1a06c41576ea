//! Artifacts and the run manifest. Every file goes through a temporary file
//! in the target directory and is renamed into place, so readers never see a
//! half-written artifact.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::CliError;

#[derive(Clone, Debug)]
pub struct Artifact {
    pub name: String,
    pub contents: String,
}

impl Artifact {
    pub fn new(name: impl Into<String>, contents: impl Into<String>) -> Self {
        Artifact { name: name.into(), contents: contents.into() }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    pub fn at_least(name: &str, value: f64, floor: f64) -> Self {
        Check { name: name.into(), passed: value >= floor, detail: format!("{value:.12e} >= {floor:.3e}") }
    }

    pub fn at_most(name: &str, value: f64, ceiling: f64) -> Self {
        Check { name: name.into(), passed: value <= ceiling, detail: format!("{value:.12e} <= {ceiling:.3e}") }
    }
}

#[derive(Debug, Serialize)]
pub struct ErrorInfo {
    pub kind: &'static str,
    pub message: String,
}

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub seed: u64,
    pub grid_scale: f64,
    /// The configuration as parsed, with defaults filled in.
    pub config: Option<serde_json::Value>,
    pub wall_clock_seconds: f64,
    pub status: &'static str,
    pub exit_code: i32,
    pub error: Option<ErrorInfo>,
    pub checks: Vec<Check>,
    pub artifacts: Vec<String>,
    pub summary: serde_json::Map<String, serde_json::Value>,
}

pub const MANIFEST_NAME: &str = "manifest.json";

pub fn write_atomic(dir: &Path, name: &str, contents: &[u8]) -> Result<PathBuf, CliError> {
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents)?;
    tmp.as_file().sync_all()?;
    let target = dir.join(name);
    tmp.persist(&target).map_err(|e| CliError::Io(e.to_string()))?;
    Ok(target)
}

/// Stages every artifact before renaming any, so a failed write leaves the
/// directory as it was.
pub fn write_artifacts(dir: &Path, artifacts: &[Artifact]) -> Result<(), CliError> {
    let mut staged = Vec::with_capacity(artifacts.len());
    for a in artifacts {
        let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
        tmp.write_all(a.contents.as_bytes())?;
        tmp.as_file().sync_all()?;
        staged.push((tmp, dir.join(&a.name)));
    }
    for (tmp, target) in staged {
        tmp.persist(target).map_err(|e| CliError::Io(e.to_string()))?;
    }
    Ok(())
}

pub fn write_manifest(dir: &Path, manifest: &Manifest) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(manifest).map_err(|e| CliError::Io(e.to_string()))?;
    text.push('\n');
    write_atomic(dir, MANIFEST_NAME, text.as_bytes())?;
    Ok(())
}
