//! Heart rate, beat intervals, blood-volume pulse and breathing rate derived
//! from a raw PPG stream.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats;
use crate::stream::{Channel, SensorStream};

pub const MIN_IBI_S: f64 = 0.33;
pub const MAX_IBI_S: f64 = 2.0;
pub const REFRACTORY_S: f64 = 0.33;
/// Default grid for HR and IBI series.
pub const DERIVED_RATE_HZ: f64 = 4.0;
pub const BR_WINDOW_S: f64 = 30.0;
pub const BR_BAND_HZ: (f64, f64) = (0.1, 0.5);
const BR_FFT_LEN: usize = 2048;
/// Envelope modulation (std / mean) below which a window carries no breathing
/// information; sub-sample peak interpolation alone leaves ripple near 1e-5.
const MIN_MODULATION_DEPTH: f64 = 1e-3;

/// Detected beats. `ibis_s[k]` is the interval starting at peak `ibi_start[k]`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PulseTrain {
    pub peak_times_s: Vec<f64>,
    /// Detrended amplitude at each peak.
    pub peak_amplitudes: Vec<f64>,
    pub ibis_s: Vec<f64>,
    pub ibi_start: Vec<usize>,
    /// Intervals outside `[MIN_IBI_S, MAX_IBI_S]`, dropped from `ibis_s`.
    pub dropped_ibis: usize,
}

impl PulseTrain {
    pub fn is_empty(&self) -> bool {
        self.peak_times_s.is_empty()
    }

    pub fn mean_ibi_s(&self) -> Option<f64> {
        (!self.ibis_s.is_empty()).then(|| stats::mean(&self.ibis_s))
    }
}

/// Subtract a 1 s moving mean. The window is centered exactly (for an even
/// length the two end samples get half weight) and, near the edges, shifted to
/// stay inside the signal rather than shrunk.
fn detrend(values: &[f64], rate_hz: f64) -> Vec<f64> {
    let n = values.len();
    let h = ((rate_hz.round() as usize) / 2).max(1);
    if n < 2 * h + 1 {
        let m = stats::mean(values);
        return values.iter().map(|v| v - m).collect();
    }
    let mut prefix = vec![0.0; n + 1];
    for (i, v) in values.iter().enumerate() {
        prefix[i + 1] = prefix[i] + v;
    }
    (0..n)
        .map(|i| {
            let c = i.clamp(h, n - 1 - h);
            let inner = prefix[c + h] - prefix[c + 1 - h];
            let trend = (inner + 0.5 * (values[c - h] + values[c + h])) / (2 * h) as f64;
            values[i] - trend
        })
        .collect()
}

/// Peak detection on the 1 s-detrended pulse wave: local maxima above half the
/// 90th percentile, a 0.33 s refractory period, parabolic sub-sample timing.
pub fn detect_pulses(ppg: &SensorStream) -> Result<PulseTrain> {
    let rate = ppg.sample_rate_hz();
    let needed = (5.0 * rate).ceil() as usize;
    if ppg.len() < needed {
        return Err(Error::SignalTooShort { needed, got: ppg.len() });
    }
    let x = detrend(ppg.values(), rate);
    let threshold = 0.5 * stats::quantile(&x, 0.9);
    let refractory = REFRACTORY_S * rate;

    let mut peaks: Vec<usize> = Vec::new();
    for i in 1..x.len() - 1 {
        if !(x[i] > x[i - 1] && x[i] >= x[i + 1] && x[i] > threshold && x[i] > 0.0) {
            continue;
        }
        match peaks.last_mut() {
            Some(last) if ((i - *last) as f64) < refractory => {
                if x[i] > x[*last] {
                    *last = i;
                }
            }
            _ => peaks.push(i),
        }
    }

    let mut train = PulseTrain::default();
    for &i in &peaks {
        let (a, b, c) = (x[i - 1], x[i], x[i + 1]);
        let denom = a - 2.0 * b + c;
        let offset = if denom != 0.0 { (0.5 * (a - c) / denom).clamp(-0.5, 0.5) } else { 0.0 };
        train.peak_times_s.push(ppg.time_of(i) + offset / rate);
        train.peak_amplitudes.push(b - 0.25 * (a - c) * offset);
    }
    for k in 1..train.peak_times_s.len() {
        let ibi = train.peak_times_s[k] - train.peak_times_s[k - 1];
        if (MIN_IBI_S..=MAX_IBI_S).contains(&ibi) {
            train.ibis_s.push(ibi);
            train.ibi_start.push(k - 1);
        } else {
            train.dropped_ibis += 1;
        }
    }
    Ok(train)
}

/// Held value of a per-interval quantity on a uniform grid from the first to
/// the last peak. Gaps left by dropped intervals hold the previous value.
fn held_series(pulses: &PulseTrain, rate_hz: f64, value: impl Fn(f64) -> f64, channel: Channel) -> Result<SensorStream> {
    if pulses.peak_times_s.len() < 2 || pulses.ibis_s.is_empty() {
        return Err(Error::TooFewPeaks { needed: 2, got: pulses.peak_times_s.len() });
    }
    let t0 = pulses.peak_times_s[0];
    let t_end = *pulses.peak_times_s.last().unwrap();
    let n = ((t_end - t0) * rate_hz + 1e-9).floor() as usize + 1;
    let mut values = Vec::with_capacity(n);
    let mut k = 0;
    let mut held = value(pulses.ibis_s[0]);
    for i in 0..n {
        let t = t0 + i as f64 / rate_hz;
        while k < pulses.ibis_s.len() && pulses.peak_times_s[pulses.ibi_start[k]] <= t {
            held = value(pulses.ibis_s[k]);
            k += 1;
        }
        values.push(held);
    }
    SensorStream::new(channel, values, rate_hz, t0)
}

/// `60 / IBI` of the interval containing each grid time.
pub fn hr_stream(pulses: &PulseTrain, rate_hz: f64) -> Result<SensorStream> {
    held_series(pulses, rate_hz, |ibi| 60.0 / ibi, Channel::DerivedHr)
}

/// Beat interval (seconds) of the interval containing each grid time.
pub fn ibi_stream(pulses: &PulseTrain, rate_hz: f64) -> Result<SensorStream> {
    held_series(pulses, rate_hz, |ibi| ibi, Channel::DerivedIbi)
}

/// Breathing-rate estimate with a per-window confidence flag.
#[derive(Clone, Debug)]
pub struct BreathingRate {
    /// Breaths per minute at 1 Hz, each sample stamped at its window center.
    pub stream: SensorStream,
    /// True where the band peak is below twice the band median magnitude or the
    /// envelope is essentially unmodulated.
    pub low_confidence: Vec<bool>,
}

/// Breathing rate from the amplitude modulation of the pulse wave: per-beat
/// amplitudes resampled to 4 Hz, dominant frequency in 0.1-0.5 Hz over 30 s
/// windows advanced by 1 s.
pub fn br_stream(ppg: &SensorStream, pulses: &PulseTrain) -> Result<BreathingRate> {
    let needed = (BR_WINDOW_S * ppg.sample_rate_hz()).ceil() as usize;
    if ppg.len() < needed {
        return Err(Error::SignalTooShort { needed, got: ppg.len() });
    }
    let env_rate = DERIVED_RATE_HZ;
    let win = (BR_WINDOW_S * env_rate).round() as usize;
    let times = &pulses.peak_times_s;
    if times.len() < 2 {
        return Err(Error::TooFewPeaks { needed: 2, got: times.len() });
    }
    let t0 = times[0];
    let n = ((times[times.len() - 1] - t0) * env_rate).floor() as usize + 1;
    if n < win {
        return Err(Error::SignalTooShort { needed: win, got: n });
    }
    let mut envelope = Vec::with_capacity(n);
    let mut k = 0;
    for i in 0..n {
        let t = t0 + i as f64 / env_rate;
        while k + 2 < times.len() && times[k + 1] <= t {
            k += 1;
        }
        let (ta, tb) = (times[k], times[k + 1]);
        let (a, b) = (pulses.peak_amplitudes[k], pulses.peak_amplitudes[k + 1]);
        let f = ((t - ta) / (tb - ta)).clamp(0.0, 1.0);
        envelope.push(a + f * (b - a));
    }

    let fft = FftPlanner::<f64>::new().plan_fft_forward(BR_FFT_LEN);
    let df = env_rate / BR_FFT_LEN as f64;
    let lo_bin = (BR_BAND_HZ.0 / df).ceil() as usize;
    let hi_bin = (BR_BAND_HZ.1 / df).floor() as usize;
    let hann: Vec<f64> = (0..win)
        .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / (win - 1) as f64).cos())
        .collect();
    let step = env_rate.round() as usize;
    let mut rates = Vec::new();
    let mut low_confidence = Vec::new();
    let mut buf = vec![Complex::new(0.0, 0.0); BR_FFT_LEN];
    let mut start = 0;
    while start + win <= n {
        let seg = &envelope[start..start + win];
        let m = stats::mean(seg);
        buf.iter_mut().for_each(|c| *c = Complex::new(0.0, 0.0));
        for (i, (&v, &w)) in seg.iter().zip(&hann).enumerate() {
            buf[i] = Complex::new((v - m) * w, 0.0);
        }
        fft.process(&mut buf);
        let mags: Vec<f64> = (lo_bin..=hi_bin).map(|b| buf[b].norm()).collect();
        let (arg, &peak) = mags
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap().then(b.0.cmp(&a.0)))
            .expect("non-empty band");
        let mut bin = (lo_bin + arg) as f64;
        if arg > 0 && arg + 1 < mags.len() {
            let (a, b, c) = (mags[arg - 1], mags[arg], mags[arg + 1]);
            let denom = a - 2.0 * b + c;
            if denom < 0.0 {
                bin += (0.5 * (a - c) / denom).clamp(-0.5, 0.5);
            }
        }
        let f = (bin * df).clamp(BR_BAND_HZ.0, BR_BAND_HZ.1);
        rates.push(60.0 * f);
        let depth = stats::variance_pop(seg).sqrt() / m.abs().max(f64::MIN_POSITIVE);
        low_confidence.push(peak < 2.0 * stats::median(&mags) || depth < MIN_MODULATION_DEPTH);
        start += step;
    }
    let stream = SensorStream::new(Channel::DerivedBr, rates, 1.0, t0 + 0.5 * BR_WINDOW_S)?;
    Ok(BreathingRate { stream, low_confidence })
}

/// Blood-volume pulse: the PPG with its 1 s moving mean removed.
pub fn bvp_stream(ppg: &SensorStream) -> Result<SensorStream> {
    if ppg.is_empty() {
        return Err(Error::EmptyStream);
    }
    SensorStream::new(Channel::DerivedBvp, detrend(ppg.values(), ppg.sample_rate_hz()), ppg.sample_rate_hz(), ppg.start_time_s())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn ppg(values: Vec<f64>) -> SensorStream {
        SensorStream::new(Channel::Ppg, values, 64.0, 0.0).unwrap()
    }

    #[test]
    fn sinusoid_pulses() {
        let s = ppg((0..640).map(|i| (2.0 * PI * i as f64 / 64.0).sin()).collect());
        let p = detect_pulses(&s).unwrap();
        assert!((9..=10).contains(&p.peak_times_s.len()), "{}", p.peak_times_s.len());
        assert!(p.ibis_s.iter().all(|ibi| (ibi - 1.0).abs() < 0.01));
    }

    #[test]
    fn flat_signal_has_no_pulses() {
        let p = detect_pulses(&ppg(vec![0.0; 640])).unwrap();
        assert!(p.is_empty());
        assert!(matches!(detect_pulses(&ppg(vec![0.0; 100])), Err(Error::SignalTooShort { .. })));
    }

    #[test]
    fn power_of_two_scaling_keeps_peak_times() {
        let v: Vec<f64> = (0..900).map(|i| (2.0 * PI * 1.3 * i as f64 / 64.0).sin().powi(3) + 0.1 * (i as f64 * 0.37).sin()).collect();
        let a = detect_pulses(&ppg(v.clone())).unwrap();
        let b = detect_pulses(&ppg(v.iter().map(|x| x * 8.0).collect())).unwrap();
        assert_eq!(a.peak_times_s, b.peak_times_s);
    }

    fn train(times: &[f64]) -> PulseTrain {
        let mut p = PulseTrain { peak_times_s: times.to_vec(), peak_amplitudes: vec![1.0; times.len()], ..Default::default() };
        for k in 1..times.len() {
            p.ibis_s.push(times[k] - times[k - 1]);
            p.ibi_start.push(k - 1);
        }
        p
    }

    #[test]
    fn hr_from_uniform_and_step_intervals() {
        let hr = hr_stream(&train(&[0.0, 0.8, 1.6, 2.4, 3.2]), 4.0).unwrap();
        assert!(hr.values().iter().all(|&v| (v - 75.0).abs() < 1e-9));
        let hr = hr_stream(&train(&[10.0, 11.0, 11.5]), 4.0).unwrap();
        assert_eq!(hr.values(), &[60.0, 60.0, 60.0, 60.0, 120.0, 120.0, 120.0]);
        assert!(matches!(hr_stream(&train(&[1.0]), 4.0), Err(Error::TooFewPeaks { .. })));
    }

    fn modulated(br_hz: f64, depth: f64, seconds: f64) -> SensorStream {
        let n = (seconds * 64.0) as usize;
        ppg((0..n)
            .map(|i| {
                let t = i as f64 / 64.0;
                (1.0 + depth * (2.0 * PI * br_hz * t).sin()) * (2.0 * PI * 1.2 * t).sin()
            })
            .collect())
    }

    #[test]
    fn breathing_rate_from_am() {
        let s = modulated(0.25, 0.3, 120.0);
        let p = detect_pulses(&s).unwrap();
        let br = br_stream(&s, &p).unwrap();
        assert!(!br.stream.is_empty());
        for &v in br.stream.values() {
            assert!((v - 15.0).abs() <= 1.0, "{v}");
        }
        assert!(br.low_confidence.iter().all(|&c| !c));
    }

    #[test]
    fn unmodulated_is_low_confidence_and_in_band() {
        let s = modulated(0.25, 0.0, 90.0);
        let p = detect_pulses(&s).unwrap();
        let br = br_stream(&s, &p).unwrap();
        assert!(br.stream.values().iter().all(|v| (6.0..=30.0).contains(v)));
        // The first window holds a beat inside the detrending edge region.
        assert!(br.low_confidence[1..].iter().all(|&c| c));
    }

    #[test]
    fn bvp_detrends() {
        let c = bvp_stream(&ppg(vec![3.0; 200])).unwrap();
        assert!(c.values().iter().all(|&v| v == 0.0));
        let n = 64 * 10;
        let sig: Vec<f64> = (0..n).map(|i| (2.0 * PI * 2.0 * i as f64 / 64.0).sin()).collect();
        let raw: Vec<f64> = sig.iter().enumerate().map(|(i, s)| s + 0.05 * i as f64).collect();
        let b = bvp_stream(&ppg(raw)).unwrap();
        let err = (64..n - 64).map(|i| (b.values()[i] - sig[i]).abs()).fold(0.0, f64::max);
        assert!(err < 0.05, "{err}");
        for start in (64..n - 128).step_by(17) {
            let m = stats::mean(&b.values()[start..start + 64]);
            assert!(m.abs() < 1e-6, "{m}");
        }
    }
}
