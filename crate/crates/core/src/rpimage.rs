//! Modified recurrence-plot encoding of a signal window as a fixed-size
//! three-channel image.
//!
//! Each signal becomes the signed, unthresholded difference matrix
//! `M[i][j] = s[i] - s[j]`, is min-max normalized to `[0, 1]` (a constant
//! matrix maps to 0.5) and bilinearly resized to [`IMAGE_H`] x [`IMAGE_W`].
//!
//! Resizing uses half-pixel centers: output row `y` samples source row
//! `(y + 0.5) * n / IMAGE_H - 0.5`, clamped to `[0, n - 1]`, and likewise for
//! columns; the two source neighbours are blended linearly along each axis.

use std::io::BufWriter;
use std::path::Path;

use crate::error::{Error, Result};
use crate::real::Real;

pub const IMAGE_C: usize = 3;
pub const IMAGE_H: usize = 155;
pub const IMAGE_W: usize = 220;
pub const MIN_SIGNAL_LEN: usize = 16;
pub const MAX_SIGNAL_LEN: usize = 4096;

/// A `3 x 155 x 220` image, channel-major, pixel values in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct RpImage<T: Real> {
    pixels: Vec<T>,
}

impl<T: Real> RpImage<T> {
    pub fn pixels(&self) -> &[T] {
        &self.pixels
    }

    pub fn into_pixels(self) -> Vec<T> {
        self.pixels
    }

    pub fn channel(&self, c: usize) -> &[T] {
        &self.pixels[c * IMAGE_H * IMAGE_W..(c + 1) * IMAGE_H * IMAGE_W]
    }

    pub fn get(&self, c: usize, y: usize, x: usize) -> T {
        self.pixels[(c * IMAGE_H + y) * IMAGE_W + x]
    }

    /// Debug export: 8-bit RGB PNG with `round(255 * pixel)`.
    pub fn write_png(&self, path: &Path) -> Result<()> {
        let mut rgb = Vec::with_capacity(IMAGE_H * IMAGE_W * 3);
        for y in 0..IMAGE_H {
            for x in 0..IMAGE_W {
                for c in 0..IMAGE_C {
                    let v = (self.get(c, y, x).to_f64_lossy() * 255.0).round().clamp(0.0, 255.0);
                    rgb.push(v as u8);
                }
            }
        }
        let mut buf = Vec::new();
        {
            let mut enc = png::Encoder::new(BufWriter::new(&mut buf), IMAGE_W as u32, IMAGE_H as u32);
            enc.set_color(png::ColorType::Rgb);
            enc.set_depth(png::BitDepth::Eight);
            let mut w = enc.write_header().map_err(|e| Error::Container(e.to_string()))?;
            w.write_image_data(&rgb).map_err(|e| Error::Container(e.to_string()))?;
        }
        crate::container::write_atomic(path, &buf)
    }
}

pub type RpImage32 = RpImage<f32>;
pub type RpImage64 = RpImage<f64>;

/// Signed difference matrix, row-major `n x n`.
pub fn modified_rp_matrix<T: Real>(signal: &[T]) -> Result<Vec<T>> {
    let n = signal.len();
    if n < 2 {
        return Err(Error::SignalTooShort { needed: 2, got: n });
    }
    let mut m = Vec::with_capacity(n * n);
    for &si in signal {
        m.extend(signal.iter().map(|&sj| si - sj));
    }
    Ok(m)
}

/// Min-max normalization of a difference matrix. The extremes of `s_i - s_j`
/// are `-range` and `+range`, so this equals `(s_i - s_j + range) / (2 range)`.
fn normalized_rp<T: Real>(signal: &[T]) -> Result<Vec<T>> {
    let m = modified_rp_matrix(signal)?;
    let (lo, hi) = m.iter().fold((T::infinity(), T::neg_infinity()), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let span = hi - lo;
    if span <= T::zero() {
        return Ok(vec![T::of(0.5); m.len()]);
    }
    Ok(m.into_iter().map(|v| ((v - lo) / span).max(T::zero()).min(T::one())).collect())
}

/// Source coordinate and blend weight for output index `o` of `out_len`.
fn source_coord<T: Real>(o: usize, out_len: usize, in_len: usize) -> (usize, usize, T) {
    let pos = ((o as f64 + 0.5) * in_len as f64 / out_len as f64 - 0.5).clamp(0.0, (in_len - 1) as f64);
    let i0 = pos.floor() as usize;
    let i1 = (i0 + 1).min(in_len - 1);
    (i0, i1, T::of(pos - i0 as f64))
}

/// Bilinear resize of a row-major `h x w` matrix to `out_h x out_w`.
pub fn resize_bilinear<T: Real>(src: &[T], h: usize, w: usize, out_h: usize, out_w: usize) -> Vec<T> {
    let cols: Vec<(usize, usize, T)> = (0..out_w).map(|x| source_coord(x, out_w, w)).collect();
    let mut out = Vec::with_capacity(out_h * out_w);
    for y in 0..out_h {
        let (y0, y1, fy) = source_coord::<T>(y, out_h, h);
        let (r0, r1) = (&src[y0 * w..(y0 + 1) * w], &src[y1 * w..(y1 + 1) * w]);
        for &(x0, x1, fx) in &cols {
            let top = r0[x0] + fx * (r0[x1] - r0[x0]);
            let bottom = r1[x0] + fx * (r1[x1] - r1[x0]);
            out.push(top + fy * (bottom - top));
        }
    }
    out
}

/// Encode one signal (replicated into all three channels) or three signals
/// (one per channel, in axis order).
pub fn encode_window<T: Real>(slices: &[&[T]]) -> Result<RpImage<T>> {
    if slices.len() != 1 && slices.len() != 3 {
        return Err(Error::InvalidParameter(format!("expected 1 or 3 signals, got {}", slices.len())));
    }
    for s in slices {
        if s.len() < MIN_SIGNAL_LEN {
            return Err(Error::SignalTooShort { needed: MIN_SIGNAL_LEN, got: s.len() });
        }
        if s.len() > MAX_SIGNAL_LEN {
            return Err(Error::SignalTooLong { max: MAX_SIGNAL_LEN, got: s.len() });
        }
    }
    let plane = IMAGE_H * IMAGE_W;
    let mut pixels = Vec::with_capacity(IMAGE_C * plane);
    for s in slices {
        let n = s.len();
        pixels.extend(resize_bilinear(&normalized_rp(s)?, n, n, IMAGE_H, IMAGE_W));
    }
    if slices.len() == 1 {
        let first = pixels.clone();
        pixels.extend_from_slice(&first);
        pixels.extend_from_slice(&first);
    }
    Ok(RpImage { pixels })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn small_matrices() {
        assert_eq!(modified_rp_matrix(&[0.0, 1.0]).unwrap(), vec![0.0, -1.0, 1.0, 0.0]);
        assert!(modified_rp_matrix(&[3.0; 5]).unwrap().iter().all(|&v| v == 0.0));
        assert!(modified_rp_matrix(&[1.0]).is_err());
    }

    #[test]
    fn constant_axes_give_uniform_half() {
        let c = [2.0f64; 40];
        let img = encode_window(&[&c[..], &c[..], &c[..]]).unwrap();
        assert_eq!(img.pixels().len(), 3 * 155 * 220);
        assert!(img.pixels().iter().all(|&p| p == 0.5));
    }

    #[test]
    fn single_signal_is_replicated() {
        let s: Vec<f32> = (0..64).map(|i| (i as f32 * 0.3).sin()).collect();
        let img = encode_window(&[&s[..]]).unwrap();
        assert_eq!(img.channel(0), img.channel(1));
        assert_eq!(img.channel(1), img.channel(2));
    }

    #[test]
    fn length_limits() {
        assert!(matches!(encode_window(&[&[0.0f64; 15][..]]), Err(Error::SignalTooShort { .. })));
        assert!(matches!(encode_window(&[&vec![0.0f64; 4097][..]]), Err(Error::SignalTooLong { .. })));
    }

    #[test]
    fn power_of_two_scaling_is_bitwise_invariant() {
        let s: Vec<f64> = (0..50).map(|i| ((i * 7919) % 101) as f64 / 17.0).collect();
        let scaled: Vec<f64> = s.iter().map(|v| v * 4.0).collect();
        assert_eq!(encode_window(&[&s[..]]).unwrap(), encode_window(&[&scaled[..]]).unwrap());
    }

    proptest! {
        #[test]
        fn antisymmetric(s in prop::collection::vec(-100.0f64..100.0, 2..40)) {
            let n = s.len();
            let m = modified_rp_matrix(&s).unwrap();
            for i in 0..n {
                for j in 0..n {
                    prop_assert_eq!(m[i * n + j], -m[j * n + i]);
                }
            }
        }

        #[test]
        fn affine_invariance(s in prop::collection::vec(-10.0f64..10.0, 16..60), a in 0.1f64..10.0, b in -5.0f64..5.0) {
            prop_assume!(s.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - s.iter().cloned().fold(f64::INFINITY, f64::min) > 1e-3);
            let base = encode_window(&[&s[..]]).unwrap();
            let pos: Vec<f64> = s.iter().map(|v| a * v + b).collect();
            let neg: Vec<f64> = s.iter().map(|v| -a * v + b).collect();
            let p = encode_window(&[&pos[..]]).unwrap();
            let q = encode_window(&[&neg[..]]).unwrap();
            for ((x, y), z) in base.pixels().iter().zip(p.pixels()).zip(q.pixels()) {
                prop_assert!((x - y).abs() < 1e-9);
                prop_assert!((1.0 - x - z).abs() < 1e-9);
                prop_assert!((0.0..=1.0).contains(x));
            }
        }
    }
}
