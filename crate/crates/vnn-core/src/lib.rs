//! Volterra neural networks: cascaded second-order Volterra layers with
//! exact or rank-Q separable quadratic kernels, two-stream nonlinear fusion,
//! plain gradient-descent training, parameter-count and BIBO-stability
//! analysis, and bit-exact tensor/model/dataset file formats.
//!
//! The layer nonlinearity is the quadratic Volterra term itself — there are
//! no activation functions and no bias terms anywhere in the feature
//! extractor; the only constant offsets live in the linear classifier head.

pub mod cascade;
pub mod classifier;
pub mod error;
pub mod fusion;
pub mod io;
pub mod layer;
pub mod lms;
pub mod model;
pub mod oracle;
pub mod tensor;
pub mod trainer;

pub use error::{Result, VnnError};
pub use tensor::Tensor;
