use physiogait_core::Rng;

use super::{kaiming_uniform, shape_err};
use crate::autodiff::{Param, Scalar, Tensor};
use crate::error::Result;

/// Valid-padding, stride-1 cross-correlation. Weights are `[out, in * kh * kw]`.
#[derive(Clone, Debug)]
pub struct Conv2d<T> {
    pub in_ch: usize,
    pub out_ch: usize,
    pub kh: usize,
    pub kw: usize,
    pub weight: Param<T>,
    pub bias: Param<T>,
}

/// Column-buffer budget in elements. Work is tiled over output rows so the
/// unfolded columns stay cache-resident.
const TILE_ELEMS: usize = 1 << 16;

/// Unfold output rows `oy0..oy1` of one `[C, H, W]` image into
/// `[C * kh * kw, (oy1 - oy0) * OW]` columns.
#[allow(clippy::too_many_arguments)]
fn im2col<T: Scalar>(x: &[T], c: usize, h: usize, w: usize, kh: usize, kw: usize, oy0: usize, oy1: usize, col: &mut [T]) {
    let ow = w - kw + 1;
    let p = (oy1 - oy0) * ow;
    for ch in 0..c {
        for ki in 0..kh {
            for kj in 0..kw {
                let row = (ch * kh + ki) * kw + kj;
                let dst = &mut col[row * p..(row + 1) * p];
                for oy in oy0..oy1 {
                    let src = ch * h * w + (oy + ki) * w + kj;
                    dst[(oy - oy0) * ow..(oy - oy0 + 1) * ow].copy_from_slice(&x[src..src + ow]);
                }
            }
        }
    }
}

/// Adjoint of [`im2col`]: scatter-add columns back into the image.
#[allow(clippy::too_many_arguments)]
fn col2im<T: Scalar>(col: &[T], c: usize, h: usize, w: usize, kh: usize, kw: usize, oy0: usize, oy1: usize, dx: &mut [T]) {
    let ow = w - kw + 1;
    let p = (oy1 - oy0) * ow;
    for ch in 0..c {
        for ki in 0..kh {
            for kj in 0..kw {
                let row = (ch * kh + ki) * kw + kj;
                let src = &col[row * p..(row + 1) * p];
                for oy in oy0..oy1 {
                    let base = ch * h * w + (oy + ki) * w + kj;
                    let s = &src[(oy - oy0) * ow..(oy - oy0 + 1) * ow];
                    for (d, &v) in dx[base..base + ow].iter_mut().zip(s) {
                        *d += v;
                    }
                }
            }
        }
    }
}

/// Output-row tiles `(oy0, oy1)` covering `0..oh`.
fn row_tiles(oh: usize, ow: usize, k: usize) -> impl Iterator<Item = (usize, usize)> {
    let rows = (TILE_ELEMS / (k * ow)).clamp(1, oh);
    (0..oh).step_by(rows).map(move |a| (a, (a + rows).min(oh)))
}

impl<T: Scalar> Conv2d<T> {
    pub fn new(in_ch: usize, out_ch: usize, kh: usize, kw: usize, rng: &mut Rng) -> Self {
        let fan_in = in_ch * kh * kw;
        Self {
            in_ch,
            out_ch,
            kh,
            kw,
            weight: Param::new("weight", vec![out_ch, fan_in], kaiming_uniform(out_ch * fan_in, fan_in, rng)),
            bias: Param::zeros("bias", vec![out_ch]),
        }
    }

    pub fn output_shape(&self, index: usize, input: &[usize]) -> Result<Vec<usize>> {
        match *input {
            [c, h, w] if c == self.in_ch && h >= self.kh && w >= self.kw => Ok(vec![self.out_ch, h - self.kh + 1, w - self.kw + 1]),
            _ => Err(shape_err(index, format!("[{}, >={}, >={}]", self.in_ch, self.kh, self.kw), input)),
        }
    }

    pub fn forward(&self, index: usize, x: &Tensor<T>) -> Result<Tensor<T>> {
        let out_shape = self.output_shape(index, &x.shape()[1..])?;
        let (n, c, h, w) = (x.shape()[0], self.in_ch, x.shape()[2], x.shape()[3]);
        let (oh, ow) = (out_shape[1], out_shape[2]);
        let (p, k) = (oh * ow, c * self.kh * self.kw);
        let mut col = Vec::new();
        let mut y = Tensor::zeros(vec![n, self.out_ch, oh, ow]);
        let plane = self.out_ch * p;
        for i in 0..n {
            let out = &mut y.data_mut()[i * plane..(i + 1) * plane];
            for (o, chunk) in out.chunks_mut(p).enumerate() {
                chunk.iter_mut().for_each(|v| *v = self.bias.value[o]);
            }
            for (oy0, oy1) in row_tiles(oh, ow, k) {
                let pt = (oy1 - oy0) * ow;
                col.resize(k * pt, T::zero());
                im2col(x.sample(i), c, h, w, self.kh, self.kw, oy0, oy1, &mut col);
                let dst = &mut out[oy0 * ow..];
                T::gemm(self.out_ch, k, pt, T::one(), &self.weight.value, k, 1, &col, pt, 1, T::one(), dst, p, 1);
            }
        }
        Ok(y)
    }

    /// Accumulate parameter gradients; return the input gradient when asked.
    pub fn backward(&mut self, x: &Tensor<T>, dy: &Tensor<T>, need_dx: bool) -> Option<Tensor<T>> {
        let (n, c, h, w) = (x.shape()[0], self.in_ch, x.shape()[2], x.shape()[3]);
        let (oh, ow) = (h - self.kh + 1, w - self.kw + 1);
        let (p, k) = (oh * ow, c * self.kh * self.kw);
        let mut col = Vec::new();
        let mut dcol = Vec::new();
        let mut dx = need_dx.then(|| Tensor::zeros(x.shape().to_vec()));
        let plane = self.out_ch * p;
        let len = c * h * w;
        for i in 0..n {
            let g = &dy.data()[i * plane..(i + 1) * plane];
            for (o, chunk) in g.chunks(p).enumerate() {
                let s: f64 = chunk.iter().map(|v| v.to_f64_lossy()).sum();
                self.bias.grad[o] += T::of(s);
            }
            for (oy0, oy1) in row_tiles(oh, ow, k) {
                let pt = (oy1 - oy0) * ow;
                let gt = &g[oy0 * ow..];
                col.resize(k * pt, T::zero());
                im2col(x.sample(i), c, h, w, self.kh, self.kw, oy0, oy1, &mut col);
                T::gemm(self.out_ch, pt, k, T::one(), gt, p, 1, &col, 1, pt, T::one(), &mut self.weight.grad, k, 1);
                if let Some(dx) = dx.as_mut() {
                    dcol.resize(k * pt, T::zero());
                    T::gemm(k, self.out_ch, pt, T::one(), &self.weight.value, 1, k, gt, p, 1, T::zero(), &mut dcol, pt, 1);
                    col2im(&dcol, c, h, w, self.kh, self.kw, oy0, oy1, &mut dx.data_mut()[i * len..(i + 1) * len]);
                }
            }
        }
        dx
    }
}
