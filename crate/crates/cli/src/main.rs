mod commands;
mod config;
mod error;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};

use commands::{Ctx, Report};
use config::RunConfig;
use error::CliError;
use output::{write_artifacts, write_manifest, Artifact, ErrorInfo, Manifest};

const DEFAULT_OUT_DIR: &str = "stam-out";

#[derive(Parser, Debug)]
#[command(name = "stam", version, about = "Pulse-sequence compiler and simulator for adiabatic-path protocols")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Master seed; overrides the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory. Takes precedence over `output_dir` in the configuration.
    #[arg(long, global = true, env = "STAM_OUT_DIR")]
    out: Option<PathBuf>,

    /// Multiplies the number of grid points in scans and figures.
    #[arg(long, global = true, default_value_t = 1.0)]
    grid_scale: f64,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Compile the pulse table for the configured model and schedule.
    Compile,
    /// Propagate the initial state through the (possibly perturbed) sequence.
    Simulate,
    /// Open-system gate fidelity for the three-level model.
    Lindblad,
    /// Merit over a grid of control errors.
    Scan,
    /// Evaluate the adiabatic deviation bound along the path.
    Bound,
    /// Continuous linear ramp compared with the compiled sequence.
    Ramp,
    /// Regenerate one of the built-in figure data sets.
    Figure {
        #[arg(value_parser = commands::FIGURES)]
        name: String,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Compile => "compile",
            Command::Simulate => "simulate",
            Command::Lindblad => "lindblad",
            Command::Scan => "scan",
            Command::Bound => "bound",
            Command::Ramp => "ramp",
            Command::Figure { .. } => "figure",
        }
    }
}

fn load_config(path: &Path) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    RunConfig::parse(&text)
}

fn execute(cli: &Cli, cfg: Option<&RunConfig>, ctx: &Ctx) -> Result<Report, CliError> {
    if !(ctx.grid_scale > 0.0 && ctx.grid_scale.is_finite()) {
        return Err(CliError::Config(format!("--grid-scale must be positive, got {}", ctx.grid_scale)));
    }
    if let Command::Figure { name } = &cli.command {
        return commands::figure_cmd(name, ctx);
    }
    let cfg = cfg.ok_or_else(|| CliError::Config(format!("{} needs --config", cli.command.name())))?;
    match cli.command {
        Command::Compile => commands::compile_cmd(cfg),
        Command::Simulate => commands::simulate_cmd(cfg, ctx),
        Command::Lindblad => commands::lindblad_cmd(cfg, ctx),
        Command::Scan => commands::scan_cmd(cfg, ctx),
        Command::Bound => commands::bound_cmd(cfg, ctx),
        Command::Ramp => commands::ramp_cmd(cfg, ctx),
        Command::Figure { .. } => unreachable!(),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let started = Instant::now();

    let (cfg, load_error) = match cli.config.as_deref().map(load_config).transpose() {
        Ok(c) => (c, None),
        Err(e) => (None, Some(e)),
    };
    let cfg = cfg.as_ref();
    let seed = cli.seed.or(cfg.and_then(|c| c.seed)).unwrap_or(0);
    let out_dir = cli
        .out
        .clone()
        .or_else(|| cfg.and_then(|c| c.output_dir.clone()))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR));
    let ctx = Ctx { seed, grid_scale: cli.grid_scale };

    let result = match load_error {
        Some(e) => Err(e),
        None => execute(&cli, cfg, &ctx),
    };

    if let Err(e) = std::fs::create_dir_all(&out_dir) {
        eprintln!("error: cannot create {}: {e}", out_dir.display());
        return ExitCode::from(4);
    }

    let (report, failure) = match result {
        Ok(mut r) => match cfg.map(RunConfig::to_toml).transpose() {
            Ok(echo) => {
                r.artifacts.extend(echo.map(|t| Artifact::new("config.toml", t)));
                (r, None)
            }
            Err(e) => (Report::default(), Some(e)),
        },
        Err(e) => (Report::default(), Some(e)),
    };
    let mut failure = failure;
    if failure.is_none() {
        if let Err(e) = write_artifacts(&out_dir, &report.artifacts) {
            failure = Some(e);
        }
    }
    let checks_ok = report.checks.iter().all(|c| c.passed);
    let exit_code = match &failure {
        Some(e) => e.exit_code(),
        None if !checks_ok => 3,
        None => 0,
    };
    let manifest = Manifest {
        tool: "stam",
        version: env!("CARGO_PKG_VERSION"),
        command: cli.command.name().into(),
        seed,
        grid_scale: cli.grid_scale,
        config: cfg.and_then(|c| serde_json::to_value(c).ok()),
        wall_clock_seconds: started.elapsed().as_secs_f64(),
        status: match exit_code {
            0 => "ok",
            3 if failure.is_none() => "check_failed",
            _ => "error",
        },
        exit_code,
        error: failure.as_ref().map(|e| ErrorInfo { kind: e.kind(), message: e.to_string() }),
        checks: report.checks,
        artifacts: if failure.is_none() { report.artifacts.iter().map(|a| a.name.clone()).collect() } else { Vec::new() },
        summary: report.summary,
    };
    if let Some(e) = &failure {
        eprintln!("error: {e}");
    }
    for c in manifest.checks.iter().filter(|c| !c.passed) {
        eprintln!("check failed: {} ({})", c.name, c.detail);
    }
    if let Err(e) = write_manifest(&out_dir, &manifest) {
        eprintln!("error: {e}");
        return ExitCode::from(4);
    }
    ExitCode::from(exit_code as u8)
}
