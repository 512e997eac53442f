use thiserror::Error;

/// Errors raised by configuration, buffering, and the training loop.
#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid config: {0}")]
    Config(String),

    #[error("non-finite loss at step {step} ({detail})")]
    NonFinite { step: usize, detail: String },

    #[error("tensor error: {0}")]
    Tensor(#[from] cplab_tensor::TensorError),

    #[error("environment error: {0}")]
    Env(#[from] cplab_env::EnvError),

    #[error("net error: {0}")]
    Net(#[from] cplab_nets::NetError),

    #[error("buffer needs at least one episode of length >= window")]
    BufferEmpty,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("metrics serialization: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, TrainError>;
