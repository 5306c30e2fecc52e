use super::{Param, Scalar};
use crate::error::{Error, Result};

/// Bias-corrected Adam with `f64` moment estimates.
#[derive(Clone, Debug)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(lr: f64) -> Self {
        Self { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, step: 0, m: Vec::new(), v: Vec::new() }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// Update every parameter from its accumulated gradient. Moment buffers are
    /// allocated on the first call; later calls must pass the same shapes.
    pub fn step<T: Scalar>(&mut self, params: &mut [&mut Param<T>]) -> Result<()> {
        if self.m.is_empty() {
            self.m = params.iter().map(|p| vec![0.0; p.len()]).collect();
            self.v = self.m.clone();
        }
        if self.m.len() != params.len() || self.m.iter().zip(params.iter()).any(|(m, p)| m.len() != p.len()) {
            return Err(Error::ShapeMismatch {
                layer: 0,
                expected: format!("{} parameter tensors as on the first step", self.m.len()),
                got: params.iter().map(|p| p.len()).collect(),
            });
        }
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        for ((p, m), v) in params.iter_mut().zip(&mut self.m).zip(&mut self.v) {
            for i in 0..p.value.len() {
                let g = p.grad[i].to_f64_lossy();
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * g;
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * g * g;
                let update = self.lr * (m[i] / bc1) / ((v[i] / bc2).sqrt() + self.eps);
                p.value[i] = T::of(p.value[i].to_f64_lossy() - update);
            }
        }
        Ok(())
    }
}
