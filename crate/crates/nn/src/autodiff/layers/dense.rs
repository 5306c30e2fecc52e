use physiogait_core::Rng;

use super::{kaiming_uniform, shape_err};
use crate::autodiff::{Param, Scalar, Tensor};
use crate::error::Result;

/// `y = x W^T + b` with `W` stored `[out, in]`.
#[derive(Clone, Debug)]
pub struct Dense<T> {
    pub input: usize,
    pub output: usize,
    pub weight: Param<T>,
    pub bias: Param<T>,
}

impl<T: Scalar> Dense<T> {
    pub fn new(input: usize, output: usize, rng: &mut Rng) -> Self {
        Self {
            input,
            output,
            weight: Param::new("weight", vec![output, input], kaiming_uniform(output * input, input, rng)),
            bias: Param::zeros("bias", vec![output]),
        }
    }

    pub fn output_shape(&self, index: usize, input: &[usize]) -> Result<Vec<usize>> {
        match *input {
            [f] if f == self.input => Ok(vec![self.output]),
            _ => Err(shape_err(index, format!("[{}]", self.input), input)),
        }
    }

    pub fn forward(&self, index: usize, x: &Tensor<T>) -> Result<Tensor<T>> {
        self.output_shape(index, &x.shape()[1..])?;
        let n = x.shape()[0];
        let mut y = Tensor::zeros(vec![n, self.output]);
        for row in y.data_mut().chunks_mut(self.output) {
            row.copy_from_slice(&self.bias.value);
        }
        T::gemm(n, self.input, self.output, T::one(), x.data(), self.input, 1, &self.weight.value, 1, self.input, T::one(), y.data_mut(), self.output, 1);
        Ok(y)
    }

    pub fn backward(&mut self, x: &Tensor<T>, dy: &Tensor<T>, need_dx: bool) -> Option<Tensor<T>> {
        let n = x.shape()[0];
        let (fi, fo) = (self.input, self.output);
        T::gemm(fo, n, fi, T::one(), dy.data(), 1, fo, x.data(), fi, 1, T::one(), &mut self.weight.grad, fi, 1);
        for j in 0..fo {
            let s: f64 = (0..n).map(|r| dy.data()[r * fo + j].to_f64_lossy()).sum();
            self.bias.grad[j] += T::of(s);
        }
        need_dx.then(|| {
            let mut dx = Tensor::zeros(vec![n, fi]);
            T::gemm(n, fo, fi, T::one(), dy.data(), fo, 1, &self.weight.value, fi, 1, T::zero(), dx.data_mut(), fi, 1);
            dx
        })
    }
}
