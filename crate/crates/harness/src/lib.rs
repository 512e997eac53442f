//! Evaluation harness and CLI for the conscious-bottleneck lab.
//!
//! The trainer produces checkpoints; this crate measures them. It owns
//! the linear probes (does the bottleneck carry the factors an exact
//! enumeration oracle says are predictive), mutual-information tables
//! over slot readouts, statement emission and later resolution against
//! observed futures, the pixel-space baseline forecaster the bottleneck
//! must beat, a finite-difference audit of the whole differentiable
//! stack, and the `cplab` binary that ties the pieces together.

pub mod auc;
pub mod baseline;
pub mod error;
pub mod eval;
pub mod features;
pub mod gradcheck;
pub mod manifest;
pub mod mi;
pub mod probe;
pub mod statements;

pub use auc::{accuracy_at_half, rank_auc};
pub use baseline::{train_baseline, BaselineModel};
pub use error::{HarnessError, Result};
pub use eval::{evaluate, write_loss_curve, write_report, EvalOptions, EvalReport, MiReport};
pub use features::{eval_fresh_trajectories, eval_trajectory, StepRecord, TrajectoryEval};
pub use gradcheck::{run_gradient_suite, GradSuiteReport};
pub use mi::{entropy_binned, mutual_information};
pub use probe::{probe_outcome, ProbeReport};
pub use statements::{collect_statements, resolve_statements, write_statements_tsv, StatementRow};
