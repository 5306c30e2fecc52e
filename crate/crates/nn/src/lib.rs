//! Neural re-identification: a small layer-sequential reverse-mode engine
//! ([`autodiff`]) and the multi-modal Siamese network trained with it
//! ([`mmsnn`]).

pub mod autodiff;
pub mod error;
pub mod mmsnn;

pub use autodiff::{Mode, Scalar, Sequential, Tensor};
pub use error::{Error, Result};
pub use mmsnn::{ExperimentConfig, Mmsnn};

/// Single-precision network, the training default.
pub type Mmsnn32 = Mmsnn<f32>;
/// Double-precision network, used for gradient checking.
pub type Mmsnn64 = Mmsnn<f64>;
