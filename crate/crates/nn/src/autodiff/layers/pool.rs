use super::shape_err;
use crate::autodiff::{Scalar, Tensor};
use crate::error::Result;

/// 2x2 max pooling with stride 2; odd trailing rows and columns are dropped.
#[derive(Clone, Copy, Debug, Default)]
pub struct MaxPool;

impl MaxPool {
    pub fn output_shape(&self, index: usize, input: &[usize]) -> Result<Vec<usize>> {
        match *input {
            [c, h, w] if h >= 2 && w >= 2 => Ok(vec![c, h / 2, w / 2]),
            _ => Err(shape_err(index, "[C, >=2, >=2]".into(), input)),
        }
    }

    /// Output and, for each output element, the flat input index of its maximum.
    pub fn forward<T: Scalar>(&self, index: usize, x: &Tensor<T>) -> Result<(Tensor<T>, Vec<usize>)> {
        let os = self.output_shape(index, &x.shape()[1..])?;
        let (n, c, h, w) = (x.shape()[0], x.shape()[1], x.shape()[2], x.shape()[3]);
        let (oh, ow) = (os[1], os[2]);
        let mut y = Vec::with_capacity(n * c * oh * ow);
        let mut arg = Vec::with_capacity(n * c * oh * ow);
        let xd = x.data();
        for plane in 0..n * c {
            let base = plane * h * w;
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut best = base + 2 * oy * w + 2 * ox;
                    for (dy, dx) in [(0, 1), (1, 0), (1, 1)] {
                        let idx = base + (2 * oy + dy) * w + 2 * ox + dx;
                        if xd[idx] > xd[best] {
                            best = idx;
                        }
                    }
                    y.push(xd[best]);
                    arg.push(best);
                }
            }
        }
        Ok((Tensor::new(vec![n, c, oh, ow], y)?, arg))
    }

    pub fn backward<T: Scalar>(input_shape: &[usize], argmax: &[usize], dy: &Tensor<T>) -> Tensor<T> {
        let mut dx = Tensor::zeros(input_shape.to_vec());
        let d = dx.data_mut();
        for (&i, &g) in argmax.iter().zip(dy.data()) {
            d[i] += g;
        }
        dx
    }
}
