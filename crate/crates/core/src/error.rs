use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid measure: {0}")]
    InvalidMeasure(String),

    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),

    #[error("matrix is not positive definite (min eigenvalue {min_eigenvalue:e}, trace {trace:e})")]
    NotPositiveDefinite { min_eigenvalue: f64, trace: f64 },

    #[error("matrices do not commute (commutator norm {0:e})")]
    NonCommuting(f64),

    #[error("zero transform matrix")]
    ZeroMatrix,

    #[error("degenerate transformed covariance: trace is zero for measure {0}")]
    DegenerateTrace(usize),

    #[error("search failed: {0}")]
    SearchFailed(String),

    #[error("property violated: {0}")]
    PropertyViolation(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("enumeration too large: {leaves} leaves exceeds limit {limit}")]
    EnumerationTooLarge { leaves: u128, limit: u128 },

    #[error("covering check failed: direction {direction:?} is {angle} rad from the nearest center")]
    CoveringFailed { direction: Vec<f64>, angle: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
