use serde::{Deserialize, Serialize};

use super::rqa::{rqa_measures, RqaParams};
use crate::error::{Error, Result};
use crate::stats;
use crate::stream::SensorStream;
use crate::window::GestureConfig;

/// Change-detection and localization settings. All thresholds are derived from
/// robust statistics of the recent rest signal, so nothing needs manual tuning
/// per recording.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectorConfig {
    /// Baseline length in windows for the running median and MAD of determinism.
    pub trailing_windows: usize,
    /// A window is flagged when `|DET - median| > mad_k * MAD`.
    pub mad_k: f64,
    /// Lower bound on the MAD, so a perfectly still baseline does not flag noise.
    pub mad_floor: f64,
    /// Windows needed in the baseline before anything is flagged.
    pub warmup_windows: usize,
    /// Activity threshold in robust deviations above the rest activity level.
    pub activity_k: f64,
    /// Absolute activity floor in g.
    pub activity_floor_g: f64,
    pub min_span_s: f64,
    pub max_span_s: f64,
    /// Inactive stretches longer than this split a region into separate gestures.
    pub split_gap_s: f64,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            trailing_windows: 20,
            mad_k: 3.0,
            mad_floor: 0.01,
            warmup_windows: 5,
            activity_k: 8.0,
            activity_floor_g: 0.03,
            min_span_s: 0.5,
            max_span_s: 3.0,
            split_gap_s: 1.0,
        }
    }
}

/// Detect gesture intervals with the default [`DetectorConfig`].
pub fn detect_onsets(acc: [&SensorStream; 3], params: &RqaParams, gcfg: &GestureConfig) -> Result<Vec<(usize, usize)>> {
    detect_onsets_with(acc, params, gcfg, &DetectorConfig::default())
}

/// Gesture intervals as half-open accelerometer sample ranges, sorted and disjoint.
///
/// Determinism of the acceleration magnitude is tracked over sliding windows;
/// windows departing from the running median of the unflagged baseline by more
/// than `mad_k` MADs are flagged and consecutive flags merged. Each merged
/// region is then localized to the samples whose deviation from the rest
/// posture exceeds a threshold set from the baseline windows, and clamped to
/// the `[min_span_s, max_span_s]` range (longer spans are split). Active
/// stretches separated by more than `split_gap_s` become separate spans.
pub fn detect_onsets_with(
    acc: [&SensorStream; 3],
    params: &RqaParams,
    gcfg: &GestureConfig,
    cfg: &DetectorConfig,
) -> Result<Vec<(usize, usize)>> {
    gcfg.validate()?;
    let n = acc[0].len();
    if acc.iter().any(|s| s.len() != n) {
        return Err(Error::InvalidParameter("accelerometer axes differ in length".into()));
    }
    let win = gcfg.window_len_samples;
    let hop = gcfg.hop_samples();
    if n < win + hop {
        return Err(Error::StreamTooShort { needed: win + hop, got: n });
    }
    let (x, y, z) = (acc[0].values(), acc[1].values(), acc[2].values());
    let mag: Vec<f64> = (0..n).map(|i| (x[i] * x[i] + y[i] * y[i] + z[i] * z[i]).sqrt()).collect();
    let n_windows = (n - win) / hop + 1;
    let det: Vec<f64> = (0..n_windows)
        .map(|t| rqa_measures(&mag[t * hop..t * hop + win], params).map(|m| m.determinism))
        .collect::<Result<_>>()?;

    let mut flagged = vec![false; n_windows];
    let mut baseline: Vec<usize> = Vec::new();
    for t in 0..n_windows {
        if baseline.len() >= cfg.warmup_windows {
            let recent: Vec<f64> = baseline.iter().rev().take(cfg.trailing_windows).map(|&b| det[b]).collect();
            let med = stats::median(&recent);
            let mad = stats::mad(&recent).max(cfg.mad_floor);
            flagged[t] = (det[t] - med).abs() > cfg.mad_k * mad;
        }
        if !flagged[t] {
            baseline.push(t);
        }
    }

    let rate = acc[0].sample_rate_hz();
    let min_span = ((cfg.min_span_s * rate).round() as usize).max(1);
    let max_span = ((cfg.max_span_s * rate).round() as usize).max(min_span);
    let split_gap = ((cfg.split_gap_s * rate).round() as usize).max(1);
    let min_active = (min_span / 2).max(1);
    let mut spans: Vec<(usize, usize)> = Vec::new();
    let mut t = 0;
    while t < n_windows {
        if !flagged[t] {
            t += 1;
            continue;
        }
        let first = t;
        while t + 1 < n_windows && flagged[t + 1] {
            t += 1;
        }
        let last = t;
        t += 1;

        // Rest reference: the latest unflagged window ending before the run
        // starts, falling back to any earlier unflagged window.
        let Some(rest_w) = (0..first)
            .rev()
            .find(|&w| !flagged[w] && w * hop + win <= first * hop)
            .or_else(|| (0..first).rev().find(|&w| !flagged[w]))
        else {
            continue;
        };
        let rest = rest_w * hop..rest_w * hop + win;
        let centre: Vec<f64> = [x, y, z].iter().map(|a| stats::median(&a[rest.clone()])).collect();
        let activity = |i: usize| {
            ((x[i] - centre[0]).powi(2) + (y[i] - centre[1]).powi(2) + (z[i] - centre[2]).powi(2)).sqrt()
        };
        let rest_act: Vec<f64> = rest.clone().map(activity).collect();
        let threshold = (stats::median(&rest_act) + cfg.activity_k * stats::mad(&rest_act)).max(cfg.activity_floor_g);

        let prev_end = spans.last().map_or(0, |s| s.1);
        let lo = (first * hop).saturating_sub(win / 2).max(rest.end.min(first * hop)).max(prev_end);
        let hi = (last * hop + win + win / 2).min(n);
        let active: Vec<usize> = (lo..hi).filter(|&i| activity(i) > threshold).collect();
        // Split at long inactive gaps; segments with too few active samples are noise.
        let mut seg_start = 0;
        for k in 1..=active.len() {
            if k == active.len() || active[k] - active[k - 1] > split_gap {
                if k - seg_start >= min_active {
                    spans.push((active[seg_start], active[k - 1] + 1));
                }
                seg_start = k;
            }
        }
    }

    // Merge overlaps, then enforce the span limits.
    spans.sort_unstable();
    let mut merged: Vec<(usize, usize)> = Vec::new();
    for s in spans {
        match merged.last_mut() {
            Some(m) if s.0 <= m.1 => m.1 = m.1.max(s.1),
            _ => merged.push(s),
        }
    }
    let mut out: Vec<(usize, usize)> = Vec::new();
    for (a, b) in merged {
        let mut start = a;
        while start < b {
            let end = (start + max_span).min(b);
            let (mut s, mut e) = (start, end);
            if e - s < min_span {
                let grow = min_span - (e - s);
                s = s.saturating_sub(grow / 2);
                e = (s + min_span).min(n);
                s = e.saturating_sub(min_span);
            }
            if let Some(prev) = out.last() {
                s = s.max(prev.1);
            }
            if e > s {
                out.push((s, e));
            }
            start = end;
        }
    }
    Ok(out)
}
