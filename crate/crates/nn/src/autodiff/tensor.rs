use crate::error::{Error, Result};

use super::Scalar;

/// Dense row-major tensor of one to four dimensions; the first axis is the batch.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor<T> {
    shape: Vec<usize>,
    data: Vec<T>,
}

impl<T: Scalar> Tensor<T> {
    pub fn new(shape: Vec<usize>, data: Vec<T>) -> Result<Self> {
        if shape.is_empty() || shape.len() > 4 || shape.iter().product::<usize>() != data.len() {
            return Err(Error::ShapeMismatch {
                layer: 0,
                expected: format!("1-4 dims holding {} values", data.len()),
                got: shape,
            });
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        Self { shape, data: vec![T::zero(); n] }
    }

    pub fn from_f64(shape: Vec<usize>, data: &[f64]) -> Result<Self> {
        Self::new(shape, data.iter().map(|&v| T::of(v)).collect())
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn batch(&self) -> usize {
        self.shape[0]
    }

    /// Elements per batch entry.
    pub fn sample_len(&self) -> usize {
        self.shape[1..].iter().product()
    }

    pub fn sample(&self, i: usize) -> &[T] {
        let s = self.sample_len();
        &self.data[i * s..(i + 1) * s]
    }

    pub fn reshape(mut self, shape: Vec<usize>) -> Result<Self> {
        if shape.iter().product::<usize>() != self.data.len() || shape.is_empty() || shape.len() > 4 {
            return Err(Error::ShapeMismatch { layer: 0, expected: format!("{} values", self.data.len()), got: shape });
        }
        self.shape = shape;
        Ok(self)
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Stack along the batch axis; all parts must agree on the trailing shape.
    pub fn concat_batch(parts: &[&Tensor<T>]) -> Result<Self> {
        let first = parts.first().ok_or_else(|| Error::ShapeMismatch { layer: 0, expected: "at least one tensor".into(), got: vec![] })?;
        let tail = &first.shape[1..];
        let mut data = Vec::with_capacity(parts.iter().map(|p| p.len()).sum());
        let mut n = 0;
        for p in parts {
            if &p.shape[1..] != tail {
                return Err(Error::ShapeMismatch { layer: 0, expected: format!("[_, {tail:?}]"), got: p.shape.clone() });
            }
            n += p.shape[0];
            data.extend_from_slice(&p.data);
        }
        let mut shape = vec![n];
        shape.extend_from_slice(tail);
        Ok(Self { shape, data })
    }

    /// Split `[N, F]` columns into consecutive blocks of the given widths.
    pub fn split_columns(&self, widths: &[usize]) -> Result<Vec<Self>> {
        if self.shape.len() != 2 || widths.iter().sum::<usize>() != self.shape[1] {
            return Err(Error::ShapeMismatch { layer: 0, expected: format!("[N, {}]", widths.iter().sum::<usize>()), got: self.shape.clone() });
        }
        let (n, f) = (self.shape[0], self.shape[1]);
        let mut out = Vec::with_capacity(widths.len());
        let mut off = 0;
        for &w in widths {
            let mut data = Vec::with_capacity(n * w);
            for r in 0..n {
                data.extend_from_slice(&self.data[r * f + off..r * f + off + w]);
            }
            out.push(Self { shape: vec![n, w], data });
            off += w;
        }
        Ok(out)
    }

    /// Join `[N, F_i]` tensors column-wise.
    pub fn concat_columns(parts: &[Tensor<T>]) -> Result<Self> {
        let n = parts.first().map_or(0, |p| p.shape[0]);
        if parts.iter().any(|p| p.shape.len() != 2 || p.shape[0] != n) {
            return Err(Error::ShapeMismatch { layer: 0, expected: format!("[{n}, _] parts"), got: vec![] });
        }
        let f: usize = parts.iter().map(|p| p.shape[1]).sum();
        let mut data = Vec::with_capacity(n * f);
        for r in 0..n {
            for p in parts {
                let w = p.shape[1];
                data.extend_from_slice(&p.data[r * w..(r + 1) * w]);
            }
        }
        Ok(Self { shape: vec![n, f], data })
    }
}
