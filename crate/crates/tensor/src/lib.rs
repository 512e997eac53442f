//! Flat-array math for the rest of the workspace: f64 arrays, a
//! define-by-run gradient tape, Adam, counter-based seeded randomness,
//! checkpointing, and finite-difference gradient verification.
//!
//! Everything is single-threaded and deterministic given a seed. The tape
//! carries the closed set of primitives the models are written in; there is
//! no broadcasting beyond rows, columns, and scalars because nothing here
//! needs more.

pub mod checkpoint;
pub mod error;
pub mod gradcheck;
pub mod kernels;
pub mod ndarray;
pub mod optim;
pub mod rng;
pub mod sampling;
pub mod tape;

pub use error::{Result, TensorError};
pub use gradcheck::{check_gradient, GradCheckReport};
pub use ndarray::NdArray;
pub use optim::{AdamHyper, ParamEntry, ParameterStore};
pub use rng::{glorot_uniform, gumbel_sample, SeededRng};
pub use sampling::{argmax, top_k_indices};
pub use tape::{Gradients, NodeId, Tape};
