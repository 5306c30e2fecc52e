//! Layer-sequential reverse-mode differentiation over batch-first tensors.
//!
//! A [`Sequential`] forward pass in train mode returns a [`Tape`] holding what
//! each layer needs for its adjoint (inputs, pooling argmax indices, batch
//! statistics, dropout masks, LSTM step states); [`Sequential::backward`]
//! consumes it and accumulates gradients into each [`Param`].

pub mod gradcheck;
pub mod layers;
pub mod loss;
mod optim;
mod param;
mod scalar;
mod sequential;
mod tensor;

pub use layers::LayerSpec;
pub use optim::Adam;
pub use param::Param;
pub use scalar::Scalar;
pub use sequential::{Ctx, Mode, Sequential, Tape};
pub use tensor::Tensor;
