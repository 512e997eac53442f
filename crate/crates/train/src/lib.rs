//! Training loop for the bottleneck model: replay buffer over environment
//! trajectories, the combined contrastive / prediction / regularizer
//! objective, Adam updates, metrics streaming, and checkpointing.

pub mod buffer;
pub mod config;
pub mod error;
pub mod losses;
pub mod trainer;

pub use buffer::{fresh_episode, Episode, TrajectoryBuffer, WindowPick};
pub use config::{RunConfig, TrainConfig};
pub use error::{Result, TrainError};
pub use losses::{
    diversity_regularizer, entropy_of_rows, nce_loss, prediction_loss, variance_floor_penalty,
};
pub use trainer::{
    load_checkpoint, plant_constant_slot, save_checkpoint, LossBreakdown, RunArtifacts, Trainer,
};
