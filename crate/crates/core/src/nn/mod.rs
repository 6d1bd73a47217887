//! Differentiable kernels: the exact layer set the dual-stream network
//! needs, each with a hand-derived backward pass, plus the loss, parameter
//! initialization, the Adam optimizer, and checkpoint serialization.
//!
//! Every kernel is generic over [`crate::Scalar`]; training runs in `f32`
//! and the finite-difference harness drives the same code in `f64`.

pub mod activations;
pub mod adam;
pub mod batchnorm;
pub mod checkpoint;
pub mod conv;
pub mod dense;
pub mod gradcheck;
pub mod gru;
pub mod init;
pub mod loss;
pub mod pool;

pub use activations::{leaky_relu, leaky_relu_backward, relu, relu_backward, sigmoid, sigmoid_backward};
pub use adam::AdamState;
pub use batchnorm::{BatchNorm1dLayer, BnCache};
pub use checkpoint::{load_checkpoint, save_checkpoint, CheckpointError};
pub use conv::Conv1dLayer;
pub use dense::DenseLayer;
pub use gru::GruLayer;
pub use loss::bce_loss;
pub use pool::{maxpool1d, maxpool1d_backward};

use std::fmt;

/// Whether a forward pass uses batch statistics (and records caches) or
/// running statistics.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

#[derive(Clone, Debug, PartialEq)]
pub enum NnError {
    /// Tensor dimensions inconsistent with the operation.
    Shape(String),
    /// A backward call that does not match its forward cache, or a
    /// malformed optimizer/checkpoint state.
    State(String),
    /// Train-mode batch normalization over fewer than two elements per
    /// channel.
    DegenerateBatch,
    /// A classification target outside {0, 1}.
    Label(f64),
}

impl fmt::Display for NnError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NnError::Shape(msg) => write!(f, "shape error: {msg}"),
            NnError::State(msg) => write!(f, "state error: {msg}"),
            NnError::DegenerateBatch => {
                write!(f, "batch normalization needs at least two elements per channel in train mode")
            }
            NnError::Label(v) => write!(f, "classification target {v} is not 0 or 1"),
        }
    }
}

impl std::error::Error for NnError {}
