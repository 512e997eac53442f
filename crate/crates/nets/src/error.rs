use thiserror::Error;

/// Errors raised by network construction and inference.
#[derive(Debug, Error)]
pub enum NetError {
    #[error("invalid net config: {0}")]
    InvalidConfig(String),

    #[error("tensor error: {0}")]
    Tensor(#[from] cplab_tensor::TensorError),

    #[error("statement parse failed at {field}: {reason}")]
    StatementParse { field: &'static str, reason: String },

    #[error("batch size mismatch: expected {expected}, got {got}")]
    BatchMismatch { expected: usize, got: usize },
}

pub type Result<T> = std::result::Result<T, NetError>;
