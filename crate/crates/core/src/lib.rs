//! Class-conditional GAN training with a structured noise space.
//!
//! Conditioning is encoded by mean-shifting class-linked blocks of the
//! generator's Gaussian noise input instead of feeding labels to either
//! network. The crate bundles the numeric substrate (a small reverse-mode
//! autodiff engine), the layers and model variants built on it, baseline
//! recurrent conditional GANs, dataset ingestion, the adversarial training
//! loop, and a classifier-based evaluation suite.
//!
//! The numeric core is generic over [`Scalar`] (`f32`/`f64`); everything
//! above it uses the 64-bit aliases exported at the crate root.

pub mod datasets;
pub mod error;
pub mod eval;
pub mod models;
pub mod nn;
pub mod noise;
pub mod scalar;
pub mod training;
pub mod tensor;

pub use error::{Error, Result};
pub use scalar::Scalar;
pub use tensor::{Activation, ElemOp, Var};

/// 64-bit tensor used throughout models, training, and evaluation.
pub type Tensor = tensor::Tensor<f64>;
/// 64-bit computation graph.
pub type Graph = tensor::Graph<f64>;
/// 64-bit trainable parameter.
pub type Param = tensor::Param<f64>;
