use physiogait_core::Rng;

use super::shape_err;
use crate::autodiff::{Param, Scalar, Tensor};
use crate::error::Result;

/// Single-layer LSTM over `[N, T, F]` with gate order input, forget, cell,
/// output. Returns the last hidden state `[N, H]`, or every hidden state
/// `[N, T, H]` when `return_sequences` is set (needed to stack layers).
#[derive(Clone, Debug)]
pub struct Lstm<T> {
    pub input: usize,
    pub hidden: usize,
    pub return_sequences: bool,
    /// `[4H, F]`
    pub w_ih: Param<T>,
    /// `[4H, H]`
    pub w_hh: Param<T>,
    /// `[4H]`
    pub bias: Param<T>,
}

/// Per-step activations saved for backpropagation through time.
#[derive(Clone, Debug)]
pub struct LstmCache<T> {
    /// `[T][N, 4H]` gate activations (after the nonlinearities).
    pub gates: Vec<Vec<T>>,
    /// `[T + 1][N, H]` cell states, starting from zero.
    pub c: Vec<Vec<T>>,
    /// `[T + 1][N, H]` hidden states, starting from zero.
    pub h: Vec<Vec<T>>,
    /// `[T][N, H]` `tanh(c_t)`.
    pub tanh_c: Vec<Vec<T>>,
}

fn sigmoid<T: Scalar>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

impl<T: Scalar> Lstm<T> {
    /// Uniform `±1/sqrt(H)` initialization with the forget-gate bias at +1.
    pub fn new(input: usize, hidden: usize, return_sequences: bool, rng: &mut Rng) -> Self {
        let bound = 1.0 / (hidden as f64).sqrt();
        let mut draw = |n: usize| -> Vec<T> { (0..n).map(|_| T::of(rng.uniform_in(-bound, bound))).collect() };
        let w_ih = draw(4 * hidden * input);
        let w_hh = draw(4 * hidden * hidden);
        let mut bias = vec![T::zero(); 4 * hidden];
        bias[hidden..2 * hidden].iter_mut().for_each(|b| *b = T::one());
        Self {
            input,
            hidden,
            return_sequences,
            w_ih: Param::new("w_ih", vec![4 * hidden, input], w_ih),
            w_hh: Param::new("w_hh", vec![4 * hidden, hidden], w_hh),
            bias: Param::new("bias", vec![4 * hidden], bias),
        }
    }

    pub fn output_shape(&self, index: usize, input: &[usize]) -> Result<Vec<usize>> {
        match *input {
            [t, f] if f == self.input && t >= 1 => {
                Ok(if self.return_sequences { vec![t, self.hidden] } else { vec![self.hidden] })
            }
            _ => Err(shape_err(index, format!("[T, {}]", self.input), input)),
        }
    }

    pub fn forward(&self, index: usize, x: &Tensor<T>) -> Result<(Tensor<T>, LstmCache<T>)> {
        self.output_shape(index, &x.shape()[1..])?;
        let (n, steps, f) = (x.shape()[0], x.shape()[1], self.input);
        let hd = self.hidden;
        let g4 = 4 * hd;
        let mut cache = LstmCache {
            gates: Vec::with_capacity(steps),
            c: vec![vec![T::zero(); n * hd]],
            h: vec![vec![T::zero(); n * hd]],
            tanh_c: Vec::with_capacity(steps),
        };
        for t in 0..steps {
            let mut z = vec![T::zero(); n * g4];
            for row in z.chunks_mut(g4) {
                row.copy_from_slice(&self.bias.value);
            }
            T::gemm(n, f, g4, T::one(), &x.data()[t * f..], steps * f, 1, &self.w_ih.value, 1, f, T::one(), &mut z, g4, 1);
            T::gemm(n, hd, g4, T::one(), &cache.h[t], hd, 1, &self.w_hh.value, 1, hd, T::one(), &mut z, g4, 1);
            let c_prev = &cache.c[t];
            let mut c = vec![T::zero(); n * hd];
            let mut h = vec![T::zero(); n * hd];
            let mut tc = vec![T::zero(); n * hd];
            for r in 0..n {
                let zr = &mut z[r * g4..(r + 1) * g4];
                for j in 0..hd {
                    let i = sigmoid(zr[j]);
                    let fg = sigmoid(zr[hd + j]);
                    let g = zr[2 * hd + j].tanh();
                    let o = sigmoid(zr[3 * hd + j]);
                    zr[j] = i;
                    zr[hd + j] = fg;
                    zr[2 * hd + j] = g;
                    zr[3 * hd + j] = o;
                    let k = r * hd + j;
                    c[k] = fg * c_prev[k] + i * g;
                    tc[k] = c[k].tanh();
                    h[k] = o * tc[k];
                }
            }
            cache.gates.push(z);
            cache.c.push(c);
            cache.h.push(h);
            cache.tanh_c.push(tc);
        }
        let y = if self.return_sequences {
            let mut out = vec![T::zero(); n * steps * hd];
            for t in 0..steps {
                for r in 0..n {
                    out[(r * steps + t) * hd..(r * steps + t + 1) * hd].copy_from_slice(&cache.h[t + 1][r * hd..(r + 1) * hd]);
                }
            }
            Tensor::new(vec![n, steps, hd], out)?
        } else {
            Tensor::new(vec![n, hd], cache.h[steps].clone())?
        };
        Ok((y, cache))
    }

    pub fn backward(&mut self, x: &Tensor<T>, cache: &LstmCache<T>, dy: &Tensor<T>, need_dx: bool) -> Option<Tensor<T>> {
        let (n, steps, f) = (x.shape()[0], x.shape()[1], self.input);
        let hd = self.hidden;
        let g4 = 4 * hd;
        let mut dx = need_dx.then(|| Tensor::zeros(x.shape().to_vec()));
        let mut dh_next = vec![T::zero(); n * hd];
        let mut dc_next = vec![T::zero(); n * hd];
        let mut dz = vec![T::zero(); n * g4];
        let one = T::one();
        for t in (0..steps).rev() {
            let mut dh = dh_next.clone();
            if self.return_sequences {
                for r in 0..n {
                    for j in 0..hd {
                        dh[r * hd + j] += dy.data()[(r * steps + t) * hd + j];
                    }
                }
            } else if t + 1 == steps {
                dh.iter_mut().zip(dy.data()).for_each(|(a, &b)| *a += b);
            }
            let gates = &cache.gates[t];
            for r in 0..n {
                for j in 0..hd {
                    let k = r * hd + j;
                    let gr = &gates[r * g4..(r + 1) * g4];
                    let (i, fg, g, o) = (gr[j], gr[hd + j], gr[2 * hd + j], gr[3 * hd + j]);
                    let tc = cache.tanh_c[t][k];
                    let d_o = dh[k] * tc;
                    let dc = dc_next[k] + dh[k] * o * (one - tc * tc);
                    let dzr = &mut dz[r * g4..(r + 1) * g4];
                    dzr[j] = dc * g * i * (one - i);
                    dzr[hd + j] = dc * cache.c[t][k] * fg * (one - fg);
                    dzr[2 * hd + j] = dc * i * (one - g * g);
                    dzr[3 * hd + j] = d_o * o * (one - o);
                    dc_next[k] = dc * fg;
                }
            }
            T::gemm(g4, n, f, one, &dz, 1, g4, &x.data()[t * f..], steps * f, 1, one, &mut self.w_ih.grad, f, 1);
            T::gemm(g4, n, hd, one, &dz, 1, g4, &cache.h[t], hd, 1, one, &mut self.w_hh.grad, hd, 1);
            for j in 0..g4 {
                let s: f64 = (0..n).map(|r| dz[r * g4 + j].to_f64_lossy()).sum();
                self.bias.grad[j] += T::of(s);
            }
            T::gemm(n, g4, hd, one, &dz, g4, 1, &self.w_hh.value, hd, 1, T::zero(), &mut dh_next, hd, 1);
            if let Some(dx) = dx.as_mut() {
                T::gemm(n, g4, f, one, &dz, g4, 1, &self.w_ih.value, f, 1, T::zero(), &mut dx.data_mut()[t * f..], steps * f, 1);
            }
        }
        dx
    }
}
