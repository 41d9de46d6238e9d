use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("predictor index {index} out of range (d = {d})")]
    PredictorOutOfRange { index: usize, d: usize },

    #[error("bin {bin} out of range for predictor {predictor} (K = {bins})")]
    BinOutOfRange { predictor: usize, bin: u32, bins: usize },

    #[error("joint enumeration needs {cells} cells, above the limit of {limit}")]
    EnumerationBound { cells: u128, limit: u128 },

    #[error("target AIV {target} unreachable for bins {bins:?} after {redraws} redraws")]
    TargetUnreachable { target: f64, bins: Vec<usize>, redraws: usize },

    #[error("event rate must lie strictly inside (0, 1), got {0}")]
    InvalidEventRate(f64),

    #[error("floor({pi1} * {n}) = 0 events and clamping is disabled")]
    InsufficientEvents { n: usize, pi1: f64 },

    #[error("degenerate sampling plan: n1 = {n1} with n = {n}")]
    DegeneratePlan { n: usize, n1: usize },

    #[error("sample contains no events")]
    NoEvents,

    #[error("sample contains no nonevents")]
    NoNonevents,

    #[error("responses are all one class")]
    DegenerateDesign,

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("concordance needs at least one event and one nonevent")]
    SingleClass,

    #[error("invalid cutoff grid: {0}")]
    InvalidGrid(String),

    #[error("no valid records in cell {0}")]
    EmptyCell(String),

    #[error("curve fit needs at least 4 points with distinct x, got {0}")]
    InsufficientPoints(usize),

    #[error("every curve-fit start diverged")]
    CurveFitDiverged,

    #[error("no curve fit supplied for event rate {0}")]
    MissingFit(f64),

    #[error("{path}: field `{field}`: {message}")]
    Schema { path: PathBuf, field: String, message: String },

    #[error("unknown configuration id `{0}`")]
    UnknownConfig(String),

    #[error("invalid run specification: {0}")]
    InvalidRunSpec(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Whether the error stems from bad user input rather than a runtime failure.
    pub fn is_input_error(&self) -> bool {
        !matches!(
            self,
            Error::Io(_) | Error::CurveFitDiverged | Error::TargetUnreachable { .. }
        )
    }
}
