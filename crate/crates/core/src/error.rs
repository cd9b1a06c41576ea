use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("operator is not Hermitian (max deviation {deviation:.3e})")]
    NonHermitianInput { deviation: f64 },
    #[error("non-finite entries encountered in {0}")]
    NonFinite(&'static str),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("dimension {dim} exceeds the configured cap of {cap}")]
    DimensionTooLarge { dim: usize, cap: usize },
    #[error("index {index} out of range for dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },
    #[error("no energies defined for pulse {pulse}")]
    MissingEnergy { pulse: usize },
    #[error("energy law is singular at lambda = {lambda}")]
    SingularPoint { lambda: f64 },
    #[error("coupling graph has an odd cycle through level {level}")]
    NotBipartite { level: usize },
    #[error("declared coupling {{{n},{m}}} disagrees with the generator (|g| = {magnitude:.3e})")]
    InconsistentPairs { n: usize, m: usize, magnitude: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("no common pulse duration satisfies the phase condition for pulse {pulse}")]
    IncommensurateEnergies { pulse: usize },
    #[error("invalid truncation {0}")]
    InvalidTruncation(usize),
    #[error("mixing angle violates (E3-E2)cos(2xi) = E3+E2 by {residual:.3e}")]
    InconsistentAngles { residual: f64 },
    #[error("non-physical state: {0}")]
    NonPhysicalState(String),
    #[error("invalid state: {0}")]
    InvalidState(String),
    #[error("ramp did not converge: step doubling changed the state by {change:.3e} at {steps} steps")]
    ConvergenceNotReached { steps: usize, change: f64 },
    #[error("lambda = {lambda} lies outside the path [0, {end}]")]
    OutOfPath { lambda: f64, end: f64 },
    #[error("channel not applicable: {0}")]
    ChannelNotApplicable(String),
    #[error("format error: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;
