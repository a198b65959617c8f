use thiserror::Error;

#[derive(Debug, Error)]
pub enum SgpsError {
    #[error("shape mismatch: expected {expected:?}, found {found:?}")]
    ShapeMismatch {
        expected: Vec<usize>,
        found: Vec<usize>,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite value produced by {0}")]
    NonFinite(String),

    #[error("divergence at step {step} during {stage}: {detail}")]
    Divergence {
        step: usize,
        stage: String,
        detail: String,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error("image error: {0}")]
    Image(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, SgpsError>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(SgpsError::InvalidArgument(msg.into()))
}
