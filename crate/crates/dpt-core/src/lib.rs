//! Detail-preserving transformer for light-field super-resolution.
//!
//! A desk-scale, dependency-light implementation: a dense f64 tensor engine
//! with reverse-mode autodiff, the spatial-angular locally-enhanced
//! self-attention layer, the dual-branch content/gradient model with
//! cross-attention fusion, synthetic light-field generation, PSNR/SSIM
//! metrics and an l1/Adam training harness.

pub mod error;
pub mod metrics;
pub mod model;
pub mod nn;
pub mod rng;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
pub use tensor::Tensor;

pub mod gradcheck;
pub mod salsa;
pub mod lightfield;

pub use lightfield::LightField;
