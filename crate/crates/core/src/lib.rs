//! Heart-sound (PCG) abnormality detection toolkit.
//!
//! The crate covers the full batch pipeline: WAV ingestion and labeled
//! dataset manifests, signal preprocessing and heart-cycle segmentation,
//! MFCC feature extraction, a dual-stream convolutional + recurrent
//! network fused by a sigmoid-mask attention module, training with a
//! class-balanced sampler, and cycle- and patient-level evaluation.
//!
//! All numeric code is generic over [`Scalar`]; the pipeline runs in
//! `f32` (see [`Real`]) while the finite-difference test harnesses drive
//! the identical code paths in `f64`.

pub mod features;
pub mod fft;
pub mod model;
pub mod nn;
pub mod preprocess;
pub mod scalar;
pub mod signal_io;
pub mod synth;
pub mod tensor;

pub use scalar::Scalar;
pub use tensor::Tensor;

/// Precision the production pipeline trains and evaluates in.
pub type Real = f32;

/// Tensor at pipeline precision.
pub type RealTensor = Tensor<Real>;

/// Double-precision tensor for the numerical verification harnesses.
pub type Tensor64 = Tensor<f64>;
