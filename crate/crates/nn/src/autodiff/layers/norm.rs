use super::shape_err;
use crate::autodiff::{Param, Scalar, Tensor};
use crate::error::Result;

/// Batch normalization over the feature axis: axis 1 of `[N, C]` and
/// `[N, C, H, W]`, the last axis of `[N, T, F]`.
#[derive(Clone, Debug)]
pub struct BatchNorm<T> {
    pub features: usize,
    pub eps: f64,
    pub momentum: f64,
    pub gamma: Param<T>,
    pub beta: Param<T>,
    pub running_mean: Vec<T>,
    pub running_var: Vec<T>,
}

/// Saved statistics of a train-mode pass.
#[derive(Clone, Debug)]
pub struct BnCache<T> {
    pub x_hat: Vec<T>,
    pub inv_std: Vec<f64>,
    pub mean: Vec<f64>,
    pub var_unbiased: Vec<f64>,
}

/// `sum f(x_i)` in f64 with eight interleaved accumulators, so the
/// reduction is not bound by addition latency.
fn lane_sum<T: Scalar>(xs: &[T], f: impl Fn(f64) -> f64) -> f64 {
    let mut acc = [0.0f64; 8];
    let mut chunks = xs.chunks_exact(8);
    for c in &mut chunks {
        for (a, &v) in acc.iter_mut().zip(c) {
            *a += f(v.to_f64_lossy());
        }
    }
    let tail: f64 = chunks.remainder().iter().map(|v| f(v.to_f64_lossy())).sum();
    acc.iter().sum::<f64>() + tail
}

/// `(outer, features, inner)` decomposition of an input shape.
fn layout(shape: &[usize]) -> (usize, usize, usize) {
    match *shape {
        [n, c] => (n, c, 1),
        [n, t, f] => (n * t, f, 1),
        [n, c, h, w] => (n, c, h * w),
        _ => (0, 0, 0),
    }
}

impl<T: Scalar> BatchNorm<T> {
    pub fn new(features: usize, eps: f64, momentum: f64) -> Self {
        Self {
            features,
            eps,
            momentum,
            gamma: Param::new("gamma", vec![features], vec![T::one(); features]),
            beta: Param::zeros("beta", vec![features]),
            running_mean: vec![T::zero(); features],
            running_var: vec![T::one(); features],
        }
    }

    /// Feature count implied by a per-sample input shape.
    pub fn features_of(input: &[usize]) -> Option<usize> {
        match *input {
            [c] => Some(c),
            [_, f] => Some(f),
            [c, _, _] => Some(c),
            _ => None,
        }
    }

    pub fn output_shape(&self, index: usize, input: &[usize]) -> Result<Vec<usize>> {
        match Self::features_of(input) {
            Some(f) if f == self.features => Ok(input.to_vec()),
            _ => Err(shape_err(index, format!("{} features", self.features), input)),
        }
    }

    pub fn forward_train(&self, index: usize, x: &Tensor<T>) -> Result<(Tensor<T>, BnCache<T>)> {
        self.output_shape(index, &x.shape()[1..])?;
        let (outer, c, inner) = layout(x.shape());
        let m = (outer * inner) as f64;
        let xd = x.data();
        let mut mean = vec![0.0; c];
        let mut var = vec![0.0; c];
        for o in 0..outer {
            for ch in 0..c {
                let base = (o * c + ch) * inner;
                mean[ch] += lane_sum(&xd[base..base + inner], |v| v);
            }
        }
        mean.iter_mut().for_each(|v| *v /= m);
        for o in 0..outer {
            for ch in 0..c {
                let base = (o * c + ch) * inner;
                let mu = mean[ch];
                var[ch] += lane_sum(&xd[base..base + inner], |v| (v - mu) * (v - mu));
            }
        }
        var.iter_mut().for_each(|v| *v /= m);
        let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + self.eps).sqrt()).collect();
        let mut x_hat = vec![T::zero(); xd.len()];
        let mut y = vec![T::zero(); xd.len()];
        for o in 0..outer {
            for ch in 0..c {
                let base = (o * c + ch) * inner;
                let (g, b) = (self.gamma.value[ch], self.beta.value[ch]);
                for i in base..base + inner {
                    let xh = T::of((xd[i].to_f64_lossy() - mean[ch]) * inv_std[ch]);
                    x_hat[i] = xh;
                    y[i] = g * xh + b;
                }
            }
        }
        let correction = if m > 1.0 { m / (m - 1.0) } else { 1.0 };
        let var_unbiased = var.iter().map(|v| v * correction).collect();
        Ok((Tensor::new(x.shape().to_vec(), y)?, BnCache { x_hat, inv_std, mean, var_unbiased }))
    }

    /// Exponential moving update of the running statistics.
    pub fn update_running(&mut self, cache: &BnCache<T>) {
        let mo = self.momentum;
        for ch in 0..self.features {
            let rm = self.running_mean[ch].to_f64_lossy();
            let rv = self.running_var[ch].to_f64_lossy();
            self.running_mean[ch] = T::of((1.0 - mo) * rm + mo * cache.mean[ch]);
            self.running_var[ch] = T::of((1.0 - mo) * rv + mo * cache.var_unbiased[ch]);
        }
    }

    /// Eval mode: a fixed per-feature affine map.
    pub fn forward_eval(&self, index: usize, x: &Tensor<T>) -> Result<Tensor<T>> {
        self.output_shape(index, &x.shape()[1..])?;
        let (outer, c, inner) = layout(x.shape());
        let scale: Vec<T> = (0..c)
            .map(|ch| self.gamma.value[ch] / T::of((self.running_var[ch].to_f64_lossy() + self.eps).sqrt()))
            .collect();
        let mut y = x.clone();
        let d = y.data_mut();
        for o in 0..outer {
            for ch in 0..c {
                let base = (o * c + ch) * inner;
                for v in &mut d[base..base + inner] {
                    *v = (*v - self.running_mean[ch]) * scale[ch] + self.beta.value[ch];
                }
            }
        }
        Ok(y)
    }

    pub fn backward(&mut self, cache: &BnCache<T>, dy: &Tensor<T>) -> Tensor<T> {
        let (outer, c, inner) = layout(dy.shape());
        let m = (outer * inner) as f64;
        let g = dy.data();
        let mut sum_dy = vec![0.0; c];
        let mut sum_dy_xh = vec![0.0; c];
        for o in 0..outer {
            for ch in 0..c {
                let base = (o * c + ch) * inner;
                let (gs, xs) = (&g[base..base + inner], &cache.x_hat[base..base + inner]);
                sum_dy[ch] += lane_sum(gs, |v| v);
                let (mut acc, mut k) = ([0.0f64; 8], 0);
                for (gi, xi) in gs.iter().zip(xs) {
                    acc[k & 7] += gi.to_f64_lossy() * xi.to_f64_lossy();
                    k += 1;
                }
                sum_dy_xh[ch] += acc.iter().sum::<f64>();
            }
        }
        for ch in 0..c {
            self.gamma.grad[ch] += T::of(sum_dy_xh[ch]);
            self.beta.grad[ch] += T::of(sum_dy[ch]);
        }
        let mut dx = vec![T::zero(); g.len()];
        for o in 0..outer {
            for ch in 0..c {
                let base = (o * c + ch) * inner;
                let k = self.gamma.value[ch].to_f64_lossy() * cache.inv_std[ch] / m;
                for i in base..base + inner {
                    let v = m * g[i].to_f64_lossy() - sum_dy[ch] - cache.x_hat[i].to_f64_lossy() * sum_dy_xh[ch];
                    dx[i] = T::of(k * v);
                }
            }
        }
        Tensor::new(dy.shape().to_vec(), dx).expect("shape preserved")
    }
}
