//! Networks for the slot-based world model: a recurrent representation
//! encoder, a stochastic sparse-attention bottleneck with named slots, a
//! binned predictor head, a contrastive verifier, and a renderer for
//! grounded prediction statements.
//!
//! All graphs are built on the reverse-mode tape from `cplab-tensor`;
//! parameters live in a shared [`ParameterStore`](cplab_tensor::ParameterStore)
//! and are bound onto each tape via [`BoundParams`].

pub mod config;
pub mod conscious;
pub mod encode;
pub mod error;
pub mod params;
pub mod predict;
pub mod statement;
pub mod verify;

pub use config::{BinMap, NetConfig};
pub use conscious::{conscious_step, fixed_selection, ConsciousBatch, ConsciousSample, FixedPick};
pub use encode::{encode_frames, encode_step, encode_window, gru_step, zero_state};
pub use error::{NetError, Result};
pub use params::{fresh_store, init_params, BoundParams};
pub use predict::{predict, Prediction};
pub use statement::Statement;
pub use verify::{verify_one, verify_pairwise};
