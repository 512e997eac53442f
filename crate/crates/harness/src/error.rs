use thiserror::Error;

pub type Result<T> = std::result::Result<T, HarnessError>;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("evaluation data problem: {0}")]
    Data(String),

    /// Too little or one-sided data to score; callers may skip instead of
    /// aborting a larger evaluation.
    #[error("underpowered dataset: {0}")]
    Underpowered(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("numerical abort: {0}")]
    Numerical(String),

    #[error("tensor error: {0}")]
    Tensor(#[from] cplab_tensor::TensorError),

    #[error("environment error: {0}")]
    Env(#[from] cplab_env::EnvError),

    #[error("network error: {0}")]
    Net(#[from] cplab_nets::NetError),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

impl From<cplab_train::TrainError> for HarnessError {
    fn from(e: cplab_train::TrainError) -> Self {
        match e {
            cplab_train::TrainError::Config(m) => HarnessError::Config(m),
            nf @ cplab_train::TrainError::NonFinite { .. } => {
                HarnessError::Numerical(nf.to_string())
            }
            other => HarnessError::Data(other.to_string()),
        }
    }
}
