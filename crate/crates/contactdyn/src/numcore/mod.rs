//! Minimal dense-tensor compute and reverse-mode differentiation substrate.
//!
//! Everything is 64-bit during training so finite-difference gradient checks
//! are clean; checkpoint serialization downcasts to 32-bit (see the cli
//! module). The primitive set is fixed to what the model needs: affine,
//! 1-D convolution over the horizon, elementwise arithmetic, sigmoid / SiLU /
//! softplus / ln / clamp, layer normalization, max-reduce over point rows,
//! concatenation, gather, and full summation.
//!
//! Graphs are retained: build once per model configuration, then run
//! [`Graph::forward`] with bound inputs and a [`ParamSet`], and
//! [`Graph::backward`] from a scalar output to get one gradient per
//! parameter. A graph is single-writer during training; forward passes with
//! frozen parameters are safe from multiple threads.

mod graph;
mod optim;
mod tensor;

pub mod gradcheck;

pub use graph::{Execution, Graph, GraphBuilder, NamedGrads, NodeId, ParamSet};
pub use optim::OptimizerState;
pub use tensor::Tensor;

/// Errors from tensor and graph operations.
#[derive(Debug, thiserror::Error)]
pub enum NumError {
    #[error("shape mismatch in {context}: {detail}")]
    ShapeMismatch {
        context: &'static str,
        detail: String,
    },
    #[error("non-finite value produced by {context}")]
    NonFinite { context: String },
    #[error("backward requires a scalar output, got shape {shape:?}")]
    NonScalarOutput { shape: Vec<usize> },
    #[error("backward called before forward completed")]
    BackwardBeforeForward,
    #[error("unknown name '{0}'")]
    UnknownName(String),
    #[error("duplicate name '{0}'")]
    DuplicateName(String),
}

pub type Result<T> = std::result::Result<T, NumError>;
