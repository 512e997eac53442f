use thiserror::Error;

/// Errors from array construction, graph building, and checkpoint I/O.
#[derive(Debug, Error)]
pub enum TensorError {
    #[error("{op}: shape mismatch between {lhs:?} and {rhs:?}")]
    ShapeMismatch {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },

    #[error("{op}: invalid shape {shape:?} ({reason})")]
    InvalidShape {
        op: &'static str,
        shape: Vec<usize>,
        reason: String,
    },

    #[error("log of non-positive value {value}")]
    LogDomain { value: f64 },

    #[error("{op}: index {index} out of range for axis of length {len}")]
    IndexOutOfRange {
        op: &'static str,
        index: usize,
        len: usize,
    },

    #[error("top_k: k={k} exceeds score count {len}")]
    TopKRange { k: usize, len: usize },

    #[error("backward root must be scalar, got shape {shape:?}")]
    NonScalarRoot { shape: Vec<usize> },

    #[error("grad_check: step {step} outside (0, 1e-3]")]
    BadStep { step: f64 },

    #[error("parameter {name:?} already exists")]
    DuplicateParam { name: String },

    #[error("parameter {name:?} not found")]
    UnknownParam { name: String },

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("checkpoint io: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, TensorError>;
