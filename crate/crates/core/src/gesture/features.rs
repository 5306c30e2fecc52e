use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats;
use crate::stream::resample_to_len;
use crate::window::{GestureConfig, GestureWindow, MIN_WINDOW_SAMPLES};

/// Samples per axis after resampling.
pub const RESAMPLED_LEN: usize = 32;
const N_STATS: usize = 7;
pub const FEATURE_DIM: usize = 3 * N_STATS + 3 * RESAMPLED_LEN;

/// Per-axis statistics (mean, median, RMS, std, variance, skewness, kurtosis;
/// x then y then z) followed by each axis resampled to 32 samples.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GestureFeatures {
    pub stats: Vec<f64>,
    pub resampled: Vec<f64>,
}

impl GestureFeatures {
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = self.stats.clone();
        v.extend_from_slice(&self.resampled);
        v
    }
}

/// Variance is unbiased (`n - 1`); skewness and kurtosis are standardized
/// central moments (kurtosis not excess), both zero for a constant axis.
fn axis_stats(a: &[f64]) -> [f64; N_STATS] {
    let n = a.len() as f64;
    let mean = stats::mean(a);
    let median = stats::median(a);
    let rms = (a.iter().map(|v| v * v).sum::<f64>() / n).sqrt();
    let var = stats::variance(a);
    let m2 = a.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let (skew, kurt) = if m2 > 0.0 {
        let m3 = a.iter().map(|v| (v - mean).powi(3)).sum::<f64>() / n;
        let m4 = a.iter().map(|v| (v - mean).powi(4)).sum::<f64>() / n;
        (m3 / m2.powf(1.5), m4 / (m2 * m2))
    } else {
        (0.0, 0.0)
    };
    [mean, median, rms, var.sqrt(), var, skew, kurt]
}

pub fn features_from_axes(axes: [&[f64]; 3]) -> Result<GestureFeatures> {
    let mut stats = Vec::with_capacity(3 * N_STATS);
    let mut resampled = Vec::with_capacity(3 * RESAMPLED_LEN);
    for a in axes {
        if a.len() < MIN_WINDOW_SAMPLES {
            return Err(Error::WindowTooShort { needed: MIN_WINDOW_SAMPLES, got: a.len() });
        }
        stats.extend(axis_stats(a));
        resampled.extend(resample_to_len(a, RESAMPLED_LEN));
    }
    Ok(GestureFeatures { stats, resampled })
}

pub fn extract_features(window: &GestureWindow, _gcfg: &GestureConfig) -> Result<GestureFeatures> {
    features_from_axes(window.acc_axes()?)
}
