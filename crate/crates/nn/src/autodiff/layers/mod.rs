mod conv;
mod dense;
mod dropout;
mod lstm;
mod norm;
mod pool;

pub use conv::Conv2d;
pub use dense::Dense;
pub use dropout::Dropout;
pub use lstm::{Lstm, LstmCache};
pub use norm::{BatchNorm, BnCache};
pub use pool::MaxPool;

use physiogait_core::Rng;
use serde::{Deserialize, Serialize};

use super::{Param, Scalar, Tensor};

use crate::error::{Error, Result};

/// Declarative layer description. Convolutions are stride 1 with valid
/// padding; pooling is 2x2 with stride 2.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum LayerSpec {
    Conv2d { out_ch: usize, kernel_h: usize, kernel_w: usize },
    MaxPool,
    BatchNorm { eps: f64, momentum: f64 },
    Dropout { p: f64 },
    Dense { out: usize },
    Lstm { hidden: usize, return_sequences: bool },
    Relu,
    Flatten,
}

impl LayerSpec {
    pub fn batch_norm() -> Self {
        LayerSpec::BatchNorm { eps: 1e-5, momentum: 0.1 }
    }

    pub fn conv(out_ch: usize, k: usize) -> Self {
        LayerSpec::Conv2d { out_ch, kernel_h: k, kernel_w: k }
    }
}

/// `max(x, 0)` in place; returns the 0/1 mask of its derivative (zero at the kink).
pub(crate) fn relu<T: Scalar>(x: &mut Tensor<T>) -> Vec<T> {
    x.data_mut()
        .iter_mut()
        .map(|v| {
            if *v > T::zero() {
                T::one()
            } else {
                *v = T::zero();
                T::zero()
            }
        })
        .collect()
}

pub(crate) fn shape_err(layer: usize, expected: String, got: &[usize]) -> Error {
    Error::ShapeMismatch { layer, expected, got: got.to_vec() }
}

/// Kaiming-uniform draws: `U(-sqrt(6 / fan_in), sqrt(6 / fan_in))`.
pub(crate) fn kaiming_uniform<T: Scalar>(n: usize, fan_in: usize, rng: &mut Rng) -> Vec<T> {
    let bound = (6.0 / fan_in.max(1) as f64).sqrt();
    (0..n).map(|_| T::of(rng.uniform_in(-bound, bound))).collect()
}

#[derive(Clone, Debug)]
pub enum Layer<T> {
    Conv2d(Conv2d<T>),
    MaxPool(MaxPool),
    BatchNorm(BatchNorm<T>),
    Dropout(Dropout),
    Dense(Dense<T>),
    Lstm(Lstm<T>),
    Relu,
    Flatten,
}

impl<T: Scalar> Layer<T> {
    /// Instantiate `spec` for per-sample input shape `input`; returns the layer
    /// and its per-sample output shape.
    pub fn build(index: usize, spec: &LayerSpec, input: &[usize], rng: &mut Rng) -> Result<(Self, Vec<usize>)> {
        let positive = |v: usize, what: &str| {
            if v == 0 {
                Err(Error::InvalidConfig(format!("layer {index}: {what} must be positive")))
            } else {
                Ok(())
            }
        };
        let layer = match *spec {
            LayerSpec::Conv2d { out_ch, kernel_h, kernel_w } => {
                positive(out_ch, "out_ch")?;
                positive(kernel_h.min(kernel_w), "kernel size")?;
                let [c, _, _] = *input else {
                    return Err(shape_err(index, "[C, H, W]".into(), input));
                };
                Layer::Conv2d(Conv2d::new(c, out_ch, kernel_h, kernel_w, rng))
            }
            LayerSpec::MaxPool => Layer::MaxPool(MaxPool),
            LayerSpec::BatchNorm { eps, momentum } => {
                let f = BatchNorm::<T>::features_of(input).ok_or_else(|| shape_err(index, "1-3 dims".into(), input))?;
                Layer::BatchNorm(BatchNorm::new(f, eps, momentum))
            }
            LayerSpec::Dropout { p } => {
                if !(0.0..1.0).contains(&p) {
                    return Err(Error::InvalidConfig(format!("layer {index}: dropout p must be in [0, 1)")));
                }
                Layer::Dropout(Dropout { p })
            }
            LayerSpec::Dense { out } => {
                positive(out, "out")?;
                let [f] = *input else {
                    return Err(shape_err(index, "[F]".into(), input));
                };
                Layer::Dense(Dense::new(f, out, rng))
            }
            LayerSpec::Lstm { hidden, return_sequences } => {
                positive(hidden, "hidden")?;
                let [_, f] = *input else {
                    return Err(shape_err(index, "[T, F]".into(), input));
                };
                Layer::Lstm(Lstm::new(f, hidden, return_sequences, rng))
            }
            LayerSpec::Relu => Layer::Relu,
            LayerSpec::Flatten => Layer::Flatten,
        };
        let out = layer.output_shape(index, input)?;
        Ok((layer, out))
    }

    pub fn output_shape(&self, index: usize, input: &[usize]) -> Result<Vec<usize>> {
        match self {
            Layer::Conv2d(l) => l.output_shape(index, input),
            Layer::MaxPool(l) => l.output_shape(index, input),
            Layer::BatchNorm(l) => l.output_shape(index, input),
            Layer::Dropout(_) | Layer::Relu => Ok(input.to_vec()),
            Layer::Dense(l) => l.output_shape(index, input),
            Layer::Lstm(l) => l.output_shape(index, input),
            Layer::Flatten => Ok(vec![input.iter().product()]),
        }
    }

    pub fn params(&self) -> Vec<&Param<T>> {
        match self {
            Layer::Conv2d(l) => vec![&l.weight, &l.bias],
            Layer::BatchNorm(l) => vec![&l.gamma, &l.beta],
            Layer::Dense(l) => vec![&l.weight, &l.bias],
            Layer::Lstm(l) => vec![&l.w_ih, &l.w_hh, &l.bias],
            _ => Vec::new(),
        }
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param<T>> {
        match self {
            Layer::Conv2d(l) => vec![&mut l.weight, &mut l.bias],
            Layer::BatchNorm(l) => vec![&mut l.gamma, &mut l.beta],
            Layer::Dense(l) => vec![&mut l.weight, &mut l.bias],
            Layer::Lstm(l) => vec![&mut l.w_ih, &mut l.w_hh, &mut l.bias],
            _ => Vec::new(),
        }
    }
}
