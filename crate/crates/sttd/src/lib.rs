//! Small-target detection in grayscale image sequences.
//!
//! Frames are stacked into height x width x L tensors and decomposed by
//! ADMM into a low-rank background, a sparse target component, and
//! Gaussian noise. The background is regularized by a Laplace-weighted
//! singular-value surrogate in the Fourier domain and by asymmetric
//! spatial-temporal total variation. Detected targets are segmented by
//! adaptive thresholding and scored with standard local-contrast and
//! ROC metrics.

pub mod asttv;
pub mod config;
pub mod error;
pub mod imgio;
pub mod metrics;
pub mod pipeline;
pub mod solver;
pub mod synth;
pub mod tensor;
pub mod tsvd;

#[doc(hidden)]
pub mod test_util;

pub use config::RunConfig;
pub use error::{Error, Result};
pub use pipeline::{detect, DetectionResult, Frame, FrameSequence};
pub use solver::{decompose, Decomposition, SolverParams, Surrogate, TvMode};
pub use tensor::Tensor3;
