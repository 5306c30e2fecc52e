//! Small descriptive-statistics helpers, generic over the scalar type.

use crate::real::Real;

pub fn mean<T: Real>(x: &[T]) -> T {
    if x.is_empty() {
        return T::nan();
    }
    x.iter().copied().sum::<T>() / T::of(x.len() as f64)
}

/// Population variance (divides by `n`).
pub fn variance_pop<T: Real>(x: &[T]) -> T {
    let m = mean(x);
    x.iter().map(|&v| (v - m) * (v - m)).sum::<T>() / T::of(x.len() as f64)
}

/// Unbiased variance (divides by `n - 1`); zero for fewer than two samples.
pub fn variance<T: Real>(x: &[T]) -> T {
    if x.len() < 2 {
        return T::zero();
    }
    let m = mean(x);
    x.iter().map(|&v| (v - m) * (v - m)).sum::<T>() / T::of((x.len() - 1) as f64)
}

/// Quantile with linear interpolation between order statistics
/// (`q * (n - 1)` positioning).
pub fn quantile<T: Real>(x: &[T], q: f64) -> T {
    let mut v = x.to_vec();
    quantile_in_place(&mut v, q)
}

pub fn quantile_in_place<T: Real>(v: &mut [T], q: f64) -> T {
    if v.is_empty() {
        return T::nan();
    }
    v.sort_unstable_by(|a, b| a.partial_cmp(b).expect("finite values"));
    let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let i = pos.floor() as usize;
    let frac = T::of(pos - i as f64);
    if i + 1 < v.len() {
        v[i] + frac * (v[i + 1] - v[i])
    } else {
        v[i]
    }
}

pub fn median<T: Real>(x: &[T]) -> T {
    quantile(x, 0.5)
}

/// Median absolute deviation from the median (unscaled).
pub fn mad<T: Real>(x: &[T]) -> T {
    let m = median(x);
    let dev: Vec<T> = x.iter().map(|&v| (v - m).abs()).collect();
    median(&dev)
}

/// Centered moving mean with a window of `w` samples (shrinking at the edges).
pub fn moving_mean(x: &[f64], w: usize) -> Vec<f64> {
    let n = x.len();
    let half = w / 2;
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(0.0);
    for &v in x {
        prefix.push(prefix.last().unwrap() + v);
    }
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + w - half).min(n);
            (prefix[hi] - prefix[lo]) / (hi - lo) as f64
        })
        .collect()
}

/// Centered moving median with a window of `w` samples (shrinking at the edges).
pub fn moving_median(x: &[f64], w: usize) -> Vec<f64> {
    let n = x.len();
    let half = w / 2;
    let mut buf = Vec::with_capacity(w + 1);
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + w - half).min(n);
            buf.clear();
            buf.extend_from_slice(&x[lo..hi]);
            quantile_in_place(&mut buf, 0.5)
        })
        .collect()
}

pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let (ma, mb) = (mean(a), mean(b));
    let mut sab = 0.0;
    let mut saa = 0.0;
    let mut sbb = 0.0;
    for (&x, &y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    sab / (saa * sbb).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basic_estimators() {
        let x = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(mean(&x), 2.5);
        assert!((variance(&x) - 5.0f64 / 3.0).abs() < 1e-15);
        assert_eq!(median(&x), 2.5);
        assert_eq!(quantile(&x, 1.0), 4.0);
        assert_eq!(mad(&[1.0, 1.0, 2.0, 2.0, 4.0, 6.0, 9.0]), 1.0);
        assert_eq!(mean(&[1.0f32, 3.0]), 2.0f32);
    }

    #[test]
    fn moving_windows() {
        let x = [0.0, 0.0, 3.0, 0.0, 0.0];
        assert_eq!(moving_mean(&x, 3), vec![0.0, 1.0, 1.0, 1.0, 0.0]);
        assert_eq!(moving_median(&x, 3), vec![0.0, 0.0, 0.0, 0.0, 0.0]);
    }
}
