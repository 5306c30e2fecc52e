use physiogait_core::Rng;

use crate::autodiff::{Scalar, Tensor};

/// Inverted dropout: kept units are scaled by `1 / (1 - p)` in train mode.
#[derive(Clone, Copy, Debug)]
pub struct Dropout {
    pub p: f64,
}

impl Dropout {
    /// Draw a mask for a batch of `n` samples of `len` elements. With
    /// `tie_halves`, the second half of the batch reuses the first half's mask,
    /// so the two branches of a Siamese batch see identical dropout.
    pub fn mask<T: Scalar>(&self, n: usize, len: usize, tie_halves: bool, rng: &mut Rng) -> Vec<T> {
        let keep = T::of(1.0 / (1.0 - self.p));
        let drawn = if tie_halves && n % 2 == 0 { n / 2 } else { n };
        let mut mask: Vec<T> = (0..drawn * len).map(|_| if rng.bernoulli(self.p) { T::zero() } else { keep }).collect();
        if drawn != n {
            mask.extend_from_within(..);
        }
        mask
    }

    pub fn apply<T: Scalar>(x: &Tensor<T>, mask: &[T]) -> Tensor<T> {
        let mut y = x.clone();
        y.data_mut().iter_mut().zip(mask).for_each(|(v, &m)| *v *= m);
        y
    }
}
