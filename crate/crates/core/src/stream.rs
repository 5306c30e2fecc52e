//! Uniformly sampled channels and the two resampling primitives everything
//! else is built on.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Physical or derived channel carried by a [`SensorStream`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Channel {
    AccX,
    AccY,
    AccZ,
    Ppg,
    Eda,
    Temp,
    DerivedHr,
    DerivedBr,
    DerivedBvp,
    DerivedIbi,
    Tonic,
    Phasic,
}

impl Channel {
    pub const ALL: [Channel; 12] = [
        Channel::AccX,
        Channel::AccY,
        Channel::AccZ,
        Channel::Ppg,
        Channel::Eda,
        Channel::Temp,
        Channel::DerivedHr,
        Channel::DerivedBr,
        Channel::DerivedBvp,
        Channel::DerivedIbi,
        Channel::Tonic,
        Channel::Phasic,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Channel::AccX => "acc_x",
            Channel::AccY => "acc_y",
            Channel::AccZ => "acc_z",
            Channel::Ppg => "ppg",
            Channel::Eda => "eda",
            Channel::Temp => "temp",
            Channel::DerivedHr => "derived_hr",
            Channel::DerivedBr => "derived_br",
            Channel::DerivedBvp => "derived_bvp",
            Channel::DerivedIbi => "derived_ibi",
            Channel::Tonic => "tonic",
            Channel::Phasic => "phasic",
        }
    }
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Channel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Channel::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown channel {s:?}")))
    }
}

/// A uniformly sampled channel. Sample `i` is taken at
/// `start_time_s + i / sample_rate_hz`; timestamps are never stored.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SensorStream {
    values: Vec<f64>,
    sample_rate_hz: f64,
    start_time_s: f64,
    channel: Channel,
}

impl SensorStream {
    pub fn new(channel: Channel, values: Vec<f64>, sample_rate_hz: f64, start_time_s: f64) -> Result<Self> {
        if !(sample_rate_hz.is_finite() && sample_rate_hz > 0.0) {
            return Err(Error::InvalidParameter(format!("sample rate must be positive, got {sample_rate_hz}")));
        }
        if !start_time_s.is_finite() {
            return Err(Error::InvalidParameter("start time must be finite".into()));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteSample(i));
        }
        Ok(Self { values, sample_rate_hz, start_time_s, channel })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    pub fn start_time_s(&self) -> f64 {
        self.start_time_s
    }

    pub fn channel(&self) -> Channel {
        self.channel
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn period_s(&self) -> f64 {
        1.0 / self.sample_rate_hz
    }

    pub fn time_of(&self, index: usize) -> f64 {
        self.start_time_s + index as f64 / self.sample_rate_hz
    }

    /// Time just past the last sample: `start + len / rate`.
    pub fn end_time_s(&self) -> f64 {
        self.time_of(self.values.len())
    }

    pub fn duration_s(&self) -> f64 {
        self.values.len() as f64 / self.sample_rate_hz
    }

    pub fn with_channel(mut self, channel: Channel) -> Self {
        self.channel = channel;
        self
    }

    /// Linear interpolation at absolute time `t`, clamped to the first/last
    /// sample outside the stream span.
    pub fn value_at(&self, t: f64) -> f64 {
        interpolate(&self.values, (t - self.start_time_s) * self.sample_rate_hz)
    }

    /// Resample onto `target_rate_hz` by linear interpolation. The output grid
    /// starts at the first input sample and stops at or before the last one.
    pub fn resample(&self, target_rate_hz: f64) -> Result<SensorStream> {
        if !(target_rate_hz.is_finite() && target_rate_hz > 0.0) {
            return Err(Error::InvalidParameter(format!("target rate must be positive, got {target_rate_hz}")));
        }
        if self.values.len() < 2 {
            return Err(Error::EmptyStream);
        }
        if target_rate_hz == self.sample_rate_hz {
            return Ok(self.clone());
        }
        let n = self.values.len();
        let ratio = self.sample_rate_hz / target_rate_hz;
        let span = (n - 1) as f64 / ratio;
        let n_out = (span + 1e-9).floor() as usize + 1;
        let values = (0..n_out).map(|k| interpolate(&self.values, k as f64 * ratio)).collect();
        SensorStream::new(self.channel, values, target_rate_hz, self.start_time_s)
    }

    /// Samples whose timestamps fall in `[t0_s, t1_s)`.
    pub fn slice_by_time(&self, t0_s: f64, t1_s: f64) -> Result<SensorStream> {
        if !(t0_s < t1_s) {
            return Err(Error::InvalidParameter(format!("empty interval [{t0_s}, {t1_s})")));
        }
        let (lo, hi) = self.index_range(t0_s, t1_s);
        if lo >= hi {
            return Err(Error::NoOverlap);
        }
        self.slice_samples(lo, hi)
    }

    /// Half-open index range of samples with timestamps in `[t0_s, t1_s)`.
    pub fn index_range(&self, t0_s: f64, t1_s: f64) -> (usize, usize) {
        let n = self.values.len() as f64;
        let first = |t: f64| {
            let x = (t - self.start_time_s) * self.sample_rate_hz;
            (x - 1e-9).ceil().clamp(0.0, n) as usize
        };
        (first(t0_s), first(t1_s))
    }

    /// Samples `lo..hi` with the start time adjusted accordingly.
    pub fn slice_samples(&self, lo: usize, hi: usize) -> Result<SensorStream> {
        if lo >= hi || hi > self.values.len() {
            return Err(Error::NoOverlap);
        }
        Ok(SensorStream {
            values: self.values[lo..hi].to_vec(),
            sample_rate_hz: self.sample_rate_hz,
            start_time_s: self.time_of(lo),
            channel: self.channel,
        })
    }

    /// `count` equally spaced samples over `[t0_s, t1_s]` (endpoints included),
    /// linearly interpolated and clamped at the stream edges.
    pub fn sample_span(&self, t0_s: f64, t1_s: f64, count: usize) -> Vec<f64> {
        match count {
            0 => Vec::new(),
            1 => vec![self.value_at(0.5 * (t0_s + t1_s))],
            _ => {
                let step = (t1_s - t0_s) / (count - 1) as f64;
                (0..count).map(|k| self.value_at(t0_s + k as f64 * step)).collect()
            }
        }
    }
}

/// Linear interpolation of `values` at fractional index `pos`, clamped to the ends.
pub fn interpolate(values: &[f64], pos: f64) -> f64 {
    let n = values.len();
    if n == 0 {
        return f64::NAN;
    }
    if pos <= 0.0 {
        return values[0];
    }
    let last = (n - 1) as f64;
    if pos >= last {
        return values[n - 1];
    }
    let i = pos.floor() as usize;
    let frac = pos - i as f64;
    if frac == 0.0 {
        values[i]
    } else {
        values[i] + frac * (values[i + 1] - values[i])
    }
}

/// Resample a raw sequence to exactly `count` points spanning its first and last
/// samples.
pub fn resample_to_len(values: &[f64], count: usize) -> Vec<f64> {
    match (values.len(), count) {
        (_, 0) | (0, _) => Vec::new(),
        (_, 1) => vec![values[0]],
        (n, _) => {
            let step = (n - 1) as f64 / (count - 1) as f64;
            (0..count).map(|k| interpolate(values, k as f64 * step)).collect()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn stream(values: Vec<f64>, rate: f64) -> SensorStream {
        SensorStream::new(Channel::Eda, values, rate, 100.0).unwrap()
    }

    #[test]
    fn constant_stream_upsampled() {
        let s = stream(vec![5.0; 4], 4.0).resample(8.0).unwrap();
        assert!((7..=8).contains(&s.len()));
        assert!(s.values().iter().all(|&v| v == 5.0));
        assert_eq!(s.sample_rate_hz(), 8.0);
    }

    #[test]
    fn ramp_upsampled() {
        let s = stream(vec![0.0, 1.0, 2.0, 3.0], 1.0).resample(2.0).unwrap();
        assert_eq!(s.values(), &[0.0, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0]);
    }

    #[test]
    fn sine_downsampled_matches_analytic() {
        for f in [0.25, 0.5, 1.0] {
            let w = 2.0 * std::f64::consts::PI * f;
            let s = stream((0..320).map(|i| (w * i as f64 / 32.0).sin()).collect(), 32.0);
            let d = s.resample(4.0).unwrap();
            let err = d
                .values()
                .iter()
                .enumerate()
                .map(|(k, v)| (v - (w * k as f64 / 4.0).sin()).abs())
                .fold(0.0, f64::max);
            assert!(err < 0.05, "f={f} err={err}");
            // Duration preserved within one target period.
            assert!(((d.len() - 1) as f64 / 4.0 - 319.0 / 32.0).abs() <= 0.25);
        }
    }

    #[test]
    fn resample_rejects_short_and_nonfinite() {
        assert!(matches!(stream(vec![1.0], 4.0).resample(8.0), Err(Error::EmptyStream)));
        assert!(matches!(
            SensorStream::new(Channel::Eda, vec![1.0, f64::NAN], 4.0, 0.0),
            Err(Error::NonFiniteSample(1))
        ));
    }

    #[test]
    fn slice_examples() {
        let s = stream((0..40).map(f64::from).collect(), 4.0);
        let full = s.slice_by_time(s.start_time_s(), s.end_time_s()).unwrap();
        assert_eq!(full, s);
        let part = s.slice_by_time(102.0, 104.5).unwrap();
        assert_eq!(part.len(), 10);
        assert_eq!(part.start_time_s(), 102.0);
        assert_eq!(part.values()[0], 8.0);
        assert!(matches!(s.slice_by_time(0.0, 50.0), Err(Error::NoOverlap)));
    }

    proptest! {
        #[test]
        fn resample_same_rate_is_identity(v in prop::collection::vec(-1e3f64..1e3, 2..64), rate in 0.5f64..128.0) {
            let s = stream(v, rate);
            let r = s.resample(rate).unwrap();
            prop_assert_eq!(&r, &s);
            prop_assert_eq!(r.resample(rate).unwrap(), r);
        }

        #[test]
        fn slice_is_idempotent(n in 8usize..200, a in 0.0f64..20.0, len in 0.3f64..20.0) {
            let s = stream((0..n).map(|i| i as f64).collect(), 4.0);
            let (t0, t1) = (100.0 + a, 100.0 + a + len);
            if let Ok(once) = s.slice_by_time(t0, t1) {
                let twice = once.slice_by_time(t0, t1).unwrap();
                prop_assert_eq!(twice, once);
            }
        }
    }
}
