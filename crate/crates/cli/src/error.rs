use stam_core::Error;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numerical check failed: {0}")]
    Numerical(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io(_) => 4,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "ConfigError",
            CliError::Numerical(_) => "NumericalCheckFailed",
            CliError::Io(_) => "IOError",
        }
    }
}

impl From<Error> for CliError {
    // Failures of the numerics themselves are checks; anything else traces
    // back to parameters the user supplied.
    fn from(e: Error) -> Self {
        match e {
            Error::NonFinite(_)
            | Error::NonPhysicalState(_)
            | Error::ConvergenceNotReached { .. }
            | Error::NonHermitianInput { .. } => CliError::Numerical(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}
