use thiserror::Error;

/// Errors surfaced by the library.
///
/// Numerical blow-ups inside a run are not errors: they set the state's
/// divergence flag so that sweeps keep going.
#[derive(Debug, Error)]
pub enum LlrError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("time index {t} out of range for horizon {horizon}")]
    TimeOutOfRange { t: usize, horizon: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("could not draw a well-conditioned mixing matrix after {0} attempts")]
    SingularMatrix(usize),

    #[error("model does not support this operation: {0}")]
    Unsupported(&'static str),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, LlrError>;
