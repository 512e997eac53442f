//! Blocks-fall toy world.
//!
//! Piles of blocks stand at fixed columns and accumulate random nudges; when
//! lean times height crosses a threshold the pile falls and its blocks
//! scatter to random cells for a few frames. The abstract event (which pile
//! falls, and when) is low-entropy and predictable from two hidden factors,
//! while the pixel future is dominated by scatter noise and random-walking
//! distractors. Observations hide offsets below a lean threshold, so the
//! world is partially observable by construction.
//!
//! An exact oracle enumerates all nudge sequences up to a horizon and gives
//! the true fall probability, which upper-bounds any predictor trained on
//! observations alone.

pub mod config;
pub mod error;
pub mod oracle;
pub mod render;
pub mod trajectory;
pub mod world;

pub use config::EnvConfig;
pub use error::{EnvError, Result};
pub use oracle::oracle_fall_prob;
pub use render::{render, Observation, CH_BLOCK, CH_COLOR_BASE, CH_EMPTY, CH_LEAN_LEFT, CH_LEAN_RIGHT};
pub use trajectory::{sample_trajectory, Trajectory};
pub use world::{reset, step, Distractor, EventKind, EventRecord, Pile, PileStatus, WorldState};
