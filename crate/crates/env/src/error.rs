use thiserror::Error;

#[derive(Debug, Error)]
pub enum EnvError {
    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("placement failed after {attempts} attempts: {what}")]
    Placement { what: String, attempts: usize },

    #[error("oracle would enumerate {paths} paths, over the {limit} guard; lower the horizon")]
    PathGuard { paths: u64, limit: u64 },

    #[error("pile index {index} out of range for {count} piles")]
    PileIndex { index: usize, count: usize },

    #[error("trajectory length must be at least 1")]
    EmptyTrajectory,

    #[error("serialization: {0}")]
    Json(#[from] serde_json::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, EnvError>;
