//! Synthetic cohorts with known identity signatures in motion and physiology.
//!
//! Every subject gets a profile drawn from documented ranges with enforced
//! pairwise spacing, and a recording rendered from it: wrist accelerometry
//! with embedded gestures from a fixed 12-template dictionary, a PPG pulse
//! train, and EDA built from a tonic drift plus a Bateman-convolved spike
//! driver. All ground truth is returned alongside.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{Recording, ACC_RATE_HZ, BVP_RATE_HZ, EDA_RATE_HZ, TEMP_RATE_HZ};
use crate::rng::Rng;
use crate::scdecomp::{phasic_from_driver, BatemanParams};
use crate::stream::{Channel, SensorStream};
use crate::window::{GestureWindow, N_GESTURES};

/// Rate of the returned instantaneous heart-rate ground truth.
pub const TRUTH_HR_RATE_HZ: f64 = 4.0;

/// Names of the gesture dictionary, indexed by label.
pub const GESTURE_NAMES: [&str; N_GESTURES] = [
    "circle", "swipe_left", "swipe_right", "swipe_up", "swipe_down", "tap", "twist_cw", "twist_ccw", "zigzag", "push",
    "pull", "shake",
];

/// Template duration in seconds at unit speed scale.
pub fn base_duration_s(label: u8) -> f64 {
    1.0 + 0.9 * f64::from(label) / (N_GESTURES - 1) as f64
}

/// Acceleration (in g, device frame, before the envelope) of a gesture at
/// normalized time `u` in `[0, 1]`.
pub fn template(label: u8, u: f64) -> [f64; 3] {
    let s = |k: f64| (k * PI * u).sin();
    let c = |k: f64| (k * PI * u).cos();
    match label {
        0 => [0.6 * s(2.0), 0.6 * c(2.0), 0.0],
        1 => [-0.8 * s(2.0), 0.15 * s(1.0), 0.0],
        2 => [0.8 * s(2.0), -0.15 * s(1.0), 0.0],
        3 => [0.0, 0.15 * s(1.0), 0.8 * s(2.0)],
        4 => [0.0, -0.15 * s(1.0), -0.8 * s(2.0)],
        5 => [0.1 * s(2.0), 0.0, -0.9 * s(4.0)],
        6 => [0.5 * s(2.0), 0.0, 0.5 * s(4.0)],
        7 => [-0.5 * s(2.0), 0.0, 0.5 * s(4.0)],
        8 => [0.6 * s(6.0), 0.3 * s(2.0), 0.0],
        9 => [0.0, 0.8 * s(2.0), 0.2 * s(1.0)],
        10 => [0.0, -0.8 * s(2.0), 0.2 * s(1.0)],
        _ => [0.5 * s(10.0), 0.5 * (10.0 * PI * u + 1.0).sin(), 0.0],
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PpgTemplate {
    /// Standard deviation of the systolic Gaussian, seconds.
    pub systolic_width_s: f64,
    /// Dicrotic wave position as a fraction of the beat interval.
    pub dicrotic_offset: f64,
    /// Dicrotic amplitude relative to the systolic peak.
    pub dicrotic_amp: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubjectProfile {
    pub subject_id: String,
    pub resting_hr_bpm: f64,
    pub hrv_sd_s: f64,
    pub ppg_template: PpgTemplate,
    pub scr_rate_per_min: f64,
    pub scr_amp_us: f64,
    pub tau_rise_s: f64,
    pub tau_decay_s: f64,
    pub tonic_level_us: f64,
    pub gesture_speed_scale: f64,
    pub gesture_amp_scale: f64,
    /// Respiratory frequency modulating PPG amplitude.
    pub br_hz: f64,
    /// Habitual wrist orientation (radians) applied to gravity and gestures.
    pub wrist_yaw: f64,
    pub wrist_pitch: f64,
    /// Time-warp exponent: the template is evaluated at `u^skew`.
    pub gesture_skew: f64,
}

impl SubjectProfile {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            self.resting_hr_bpm,
            self.hrv_sd_s,
            self.ppg_template.systolic_width_s,
            self.ppg_template.dicrotic_offset,
            self.ppg_template.dicrotic_amp,
            self.scr_amp_us,
            self.tau_rise_s,
            self.tau_decay_s,
            self.tonic_level_us,
            self.gesture_speed_scale,
            self.gesture_amp_scale,
            self.br_hz,
            self.gesture_skew,
        ];
        if positive.iter().any(|v| !(v.is_finite() && *v > 0.0)) || self.scr_rate_per_min < 0.0 {
            return Err(Error::InvalidParameter(format!("profile {} has a non-positive parameter", self.subject_id)));
        }
        BatemanParams::new(self.tau_rise_s, self.tau_decay_s).map(|_| ())
    }

    pub fn bateman(&self) -> BatemanParams {
        BatemanParams { tau_rise_s: self.tau_rise_s, tau_decay_s: self.tau_decay_s }
    }
}

/// Additive noise per channel. `eda_snr_db`, when set, overrides `eda_sd` with
/// noise whose power is the phasic power divided by the given ratio.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub acc_sd_g: f64,
    pub ppg_sd: f64,
    pub eda_sd_us: f64,
    pub eda_snr_db: Option<f64>,
    pub temp_sd_c: f64,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self { acc_sd_g: 0.01, ppg_sd: 0.005, eda_sd_us: 0.0, eda_snr_db: Some(20.0), temp_sd_c: 0.01 }
    }
}

impl NoiseSpec {
    pub fn zero() -> Self {
        Self { acc_sd_g: 0.0, ppg_sd: 0.0, eda_sd_us: 0.0, eda_snr_db: None, temp_sd_c: 0.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CohortSpec {
    pub n_subjects: usize,
    pub episodes_per_subject: usize,
    pub noise: NoiseSpec,
    pub seed: u64,
    /// Rest before the first gesture, seconds.
    pub lead_rest_s: f64,
    /// Range of rest gaps between gestures, seconds.
    pub rest_gap_s: (f64, f64),
    /// Rest after the last gesture, seconds.
    pub tail_rest_s: f64,
}

impl Default for CohortSpec {
    fn default() -> Self {
        Self {
            n_subjects: 8,
            episodes_per_subject: 60,
            noise: NoiseSpec::default(),
            seed: 42,
            lead_rest_s: 30.0,
            rest_gap_s: (4.0, 7.0),
            tail_rest_s: 10.0,
        }
    }
}

impl CohortSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_subjects < 1 || self.episodes_per_subject < 1 {
            return Err(Error::InvalidParameter("cohort needs at least one subject and one episode".into()));
        }
        if !(self.rest_gap_s.0 >= 3.0 && self.rest_gap_s.1 >= self.rest_gap_s.0) {
            return Err(Error::InvalidParameter("rest gaps must be at least 3 s".into()));
        }
        if !(self.lead_rest_s >= 0.0 && self.tail_rest_s >= 0.0) {
            return Err(Error::InvalidParameter("rest durations must be nonnegative".into()));
        }
        Ok(())
    }
}

/// One embedded gesture in wall-clock and accelerometer-sample terms.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruthWindow {
    pub label: u8,
    pub start_sample: usize,
    pub end_sample: usize,
    pub start_s: f64,
    pub end_s: f64,
}

/// Serializable ground truth for one rendered subject.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub profile: SubjectProfile,
    pub windows: Vec<TruthWindow>,
    pub beat_times_s: Vec<f64>,
    /// Driver spikes as (time in seconds, driver value).
    pub driver_spikes: Vec<(f64, f64)>,
}

#[derive(Clone, Debug)]
pub struct Rendered {
    pub recording: Recording,
    pub windows: Vec<GestureWindow>,
    /// Sparse SCR driver at the EDA rate.
    pub driver: SensorStream,
    /// Instantaneous heart rate `60 / IBI`, held between beats.
    pub hr: SensorStream,
    /// Noise-free phasic component.
    pub phasic: SensorStream,
    pub truth: GroundTruth,
}

/// Draws over `[lo, hi]` with exactly one value per equal-width bin, away from
/// bin edges, assigned to subjects in random order. Any two subjects therefore
/// differ by at least half a bin width.
fn stratified(n: usize, lo: f64, hi: f64, rng: &mut Rng) -> Vec<f64> {
    let w = (hi - lo) / n as f64;
    let mut v: Vec<f64> = (0..n).map(|i| lo + w * (i as f64 + rng.uniform_in(0.25, 0.75))).collect();
    rng.shuffle(&mut v);
    v
}

/// Profiles for `spec.n_subjects` subjects, each parameter stratified over its range.
pub fn sample_profiles(spec: &CohortSpec, rng: &mut Rng) -> Vec<SubjectProfile> {
    let n = spec.n_subjects.max(1);
    let mut draw = |lo, hi| stratified(n, lo, hi, rng);
    let hr = draw(55.0, 90.0);
    let hrv = draw(0.01, 0.03);
    let width = draw(0.08, 0.14);
    let offset = draw(0.25, 0.35);
    let damp = draw(0.2, 0.5);
    let scr_rate = draw(2.0, 6.0);
    let scr_amp = draw(0.2, 0.8);
    let rise = draw(0.6, 0.8);
    let decay = draw(1.8, 2.4);
    let tonic = draw(1.0, 8.0);
    let speed = draw(0.7, 1.3);
    let amp = draw(0.7, 1.3);
    let br = draw(0.15, 0.4);
    let yaw = draw(-0.7, 0.7);
    let pitch = draw(-0.7, 0.7);
    let skew = draw(0.7, 1.4);
    (0..n)
        .map(|i| SubjectProfile {
            subject_id: format!("S{:02}", i + 1),
            resting_hr_bpm: hr[i],
            hrv_sd_s: hrv[i],
            ppg_template: PpgTemplate { systolic_width_s: width[i], dicrotic_offset: offset[i], dicrotic_amp: damp[i] },
            scr_rate_per_min: scr_rate[i],
            scr_amp_us: scr_amp[i],
            tau_rise_s: rise[i],
            tau_decay_s: decay[i],
            tonic_level_us: tonic[i],
            gesture_speed_scale: speed[i],
            gesture_amp_scale: amp[i],
            br_hz: br[i],
            wrist_yaw: yaw[i],
            wrist_pitch: pitch[i],
            gesture_skew: skew[i],
        })
        .collect()
}

/// Rotation applying pitch about x, then yaw about z.
fn rotate(v: [f64; 3], yaw: f64, pitch: f64) -> [f64; 3] {
    let (sp, cp) = pitch.sin_cos();
    let (sy, cy) = yaw.sin_cos();
    let a = [v[0], cp * v[1] - sp * v[2], sp * v[1] + cp * v[2]];
    [cy * a[0] - sy * a[1], sy * a[0] + cy * a[1], a[2]]
}

struct Episode {
    label: u8,
    start_s: f64,
    dur_s: f64,
    amp: f64,
}

fn n_samples(duration_s: f64, rate: f64) -> usize {
    (duration_s * rate).floor() as usize
}

/// Render one subject. Deterministic given the profile, spec and RNG state.
pub fn render_recording(profile: &SubjectProfile, spec: &CohortSpec, rng: &mut Rng) -> Result<Rendered> {
    profile.validate()?;
    spec.validate()?;
    let noise = &spec.noise;

    // Episode layout; labels cycle through shuffled passes of the dictionary.
    let mut episodes = Vec::with_capacity(spec.episodes_per_subject);
    let mut order: Vec<u8> = Vec::new();
    let mut t = spec.lead_rest_s;
    for e in 0..spec.episodes_per_subject {
        if e % N_GESTURES == 0 {
            order = (0..N_GESTURES as u8).collect();
            rng.shuffle(&mut order);
        }
        let label = order[e % N_GESTURES];
        let dur_s = base_duration_s(label) * profile.gesture_speed_scale * rng.uniform_in(0.95, 1.05);
        let amp = profile.gesture_amp_scale * rng.uniform_in(0.95, 1.05);
        // Align starts to accelerometer samples so the truth windows are exact.
        let start_s = (t * ACC_RATE_HZ).round() / ACC_RATE_HZ;
        episodes.push(Episode { label, start_s, dur_s, amp });
        t = start_s + dur_s + rng.uniform_in(spec.rest_gap_s.0, spec.rest_gap_s.1);
    }
    let last = episodes.last().map_or(t, |e| e.start_s + e.dur_s);
    let total_s = last + spec.tail_rest_s;
    let active = |t: f64| episodes.iter().any(|e| t >= e.start_s && t < e.start_s + e.dur_s);

    // Accelerometer.
    let n_acc = n_samples(total_s, ACC_RATE_HZ);
    let mut acc = [vec![0.0; n_acc], vec![0.0; n_acc], vec![0.0; n_acc]];
    let gravity = rotate([0.0, 0.0, 1.0], profile.wrist_yaw, profile.wrist_pitch);
    for k in 0..n_acc {
        for (a, g) in acc.iter_mut().zip(gravity) {
            a[k] = g;
        }
    }
    let mut windows_truth = Vec::with_capacity(episodes.len());
    for e in &episodes {
        let s0 = (e.start_s * ACC_RATE_HZ).round() as usize;
        let len = (e.dur_s * ACC_RATE_HZ).round() as usize;
        let s1 = (s0 + len).min(n_acc);
        for k in s0..s1 {
            let u = (k - s0) as f64 / len as f64;
            let env = (PI * u).sin() * e.amp;
            let v = rotate(template(e.label, u.powf(profile.gesture_skew)), profile.wrist_yaw, profile.wrist_pitch);
            for (a, x) in acc.iter_mut().zip(v) {
                a[k] += env * x;
            }
        }
        windows_truth.push(TruthWindow {
            label: e.label,
            start_sample: s0,
            end_sample: s1,
            start_s: s0 as f64 / ACC_RATE_HZ,
            end_s: s1 as f64 / ACC_RATE_HZ,
        });
    }
    if noise.acc_sd_g > 0.0 {
        for a in &mut acc {
            for v in a.iter_mut() {
                *v += noise.acc_sd_g * rng.normal();
            }
        }
    }

    // Heartbeats: interval from the instantaneous rate plus Gaussian jitter.
    let mut beats = Vec::new();
    let mut tb = rng.uniform_in(0.0, 60.0 / profile.resting_hr_bpm);
    while tb < total_s + 2.0 {
        beats.push(tb);
        let hr = profile.resting_hr_bpm + if active(tb) { 3.0 } else { 0.0 };
        tb += (60.0 / hr + profile.hrv_sd_s * rng.normal()).max(0.3);
    }

    let n_ppg = n_samples(total_s, BVP_RATE_HZ);
    let mut ppg = vec![0.0; n_ppg];
    let tpl = profile.ppg_template;
    let resp_phase = rng.uniform_in(0.0, 2.0 * PI);
    for (i, &b) in beats.iter().enumerate() {
        let ibi = beats.get(i + 1).map_or(60.0 / profile.resting_hr_bpm, |n| n - b);
        let mod_amp = 1.0 + 0.2 * (2.0 * PI * profile.br_hz * b + resp_phase).sin();
        let dic_t = b + tpl.dicrotic_offset * ibi;
        let dic_w = 1.5 * tpl.systolic_width_s;
        let lo = ((b - 4.0 * tpl.systolic_width_s) * BVP_RATE_HZ).floor().max(0.0) as usize;
        let hi = (((dic_t + 4.0 * dic_w) * BVP_RATE_HZ).ceil().max(0.0) as usize).min(n_ppg);
        for (k, p) in ppg.iter_mut().enumerate().take(hi).skip(lo) {
            let tk = k as f64 / BVP_RATE_HZ;
            let sys = (-(tk - b).powi(2) / (2.0 * tpl.systolic_width_s.powi(2))).exp();
            let dic = tpl.dicrotic_amp * (-(tk - dic_t).powi(2) / (2.0 * dic_w.powi(2))).exp();
            *p += mod_amp * (sys + dic);
        }
    }
    if noise.ppg_sd > 0.0 {
        for v in &mut ppg {
            *v += noise.ppg_sd * rng.normal();
        }
    }

    // Instantaneous heart rate truth, held from each beat.
    let n_hr = n_samples(total_s, TRUTH_HR_RATE_HZ);
    let mut hr = Vec::with_capacity(n_hr);
    let mut j = 0;
    for k in 0..n_hr {
        let tk = k as f64 / TRUTH_HR_RATE_HZ;
        while j + 2 < beats.len() && beats[j + 1] <= tk {
            j += 1;
        }
        hr.push(60.0 / (beats[j + 1] - beats[j]));
    }

    // EDA: sparse driver with a 2 s refractory period; spikes are three times
    // as likely during gestures. Driver values are scaled so a lone response
    // peaks near the drawn SCR amplitude.
    let bateman = profile.bateman();
    let dt = 1.0 / EDA_RATE_HZ;
    let t_peak = (bateman.tau_rise_s * bateman.tau_decay_s / (bateman.tau_decay_s - bateman.tau_rise_s))
        * (bateman.tau_decay_s / bateman.tau_rise_s).ln();
    let h_peak = bateman.response(t_peak);
    let n_eda = n_samples(total_s, EDA_RATE_HZ);
    let mut driver = vec![0.0; n_eda];
    let mut spikes = Vec::new();
    let base_p = profile.scr_rate_per_min / 60.0 * dt;
    let mut last_spike = f64::NEG_INFINITY;
    for (k, d) in driver.iter_mut().enumerate() {
        let tk = k as f64 * dt;
        let p = base_p * if active(tk) { 3.0 } else { 1.0 };
        if p > 0.0 && tk - last_spike >= 2.0 && rng.bernoulli(p.min(1.0)) {
            let amp = profile.scr_amp_us * rng.uniform_in(0.5, 1.5);
            *d = amp / (dt * h_peak);
            spikes.push((tk, *d));
            last_spike = tk;
        }
    }
    let phasic = phasic_from_driver(&driver, &bateman, EDA_RATE_HZ, 0.0)?;
    let drift_phase = rng.uniform_in(0.0, 2.0 * PI);
    let tonic: Vec<f64> = (0..n_eda)
        .map(|k| profile.tonic_level_us * (1.0 + 0.05 * (2.0 * PI * k as f64 * dt / 300.0 + drift_phase).sin()))
        .collect();
    let eda_sd = match noise.eda_snr_db {
        Some(db) => {
            let m = phasic.iter().sum::<f64>() / n_eda.max(1) as f64;
            let power = phasic.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n_eda.max(1) as f64;
            (power / 10f64.powf(db / 10.0)).sqrt()
        }
        None => noise.eda_sd_us,
    };
    let mut eda: Vec<f64> = tonic.iter().zip(&phasic).map(|(a, b)| a + b).collect();
    if eda_sd > 0.0 {
        for v in &mut eda {
            *v = (*v + eda_sd * rng.normal()).max(0.0);
        }
    }

    let n_temp = n_samples(total_s, TEMP_RATE_HZ);
    let temp_base = rng.uniform_in(32.0, 34.5);
    let temp: Vec<f64> = (0..n_temp)
        .map(|k| temp_base + 0.1 * (k as f64 / n_temp as f64) + noise.temp_sd_c * rng.normal())
        .collect();

    let mut recording = Recording::new(profile.subject_id.clone(), "synthetic");
    let [ax, ay, az] = acc;
    recording.insert(SensorStream::new(Channel::AccX, ax, ACC_RATE_HZ, 0.0)?);
    recording.insert(SensorStream::new(Channel::AccY, ay, ACC_RATE_HZ, 0.0)?);
    recording.insert(SensorStream::new(Channel::AccZ, az, ACC_RATE_HZ, 0.0)?);
    recording.insert(SensorStream::new(Channel::Ppg, ppg, BVP_RATE_HZ, 0.0)?);
    recording.insert(SensorStream::new(Channel::Eda, eda, EDA_RATE_HZ, 0.0)?);
    recording.insert(SensorStream::new(Channel::Temp, temp, TEMP_RATE_HZ, 0.0)?);

    let windows = windows_truth
        .iter()
        .map(|w| GestureWindow::from_recording(&recording, w.label, w.start_sample, w.end_sample))
        .collect::<Result<Vec<_>>>()?;

    Ok(Rendered {
        windows,
        driver: SensorStream::new(Channel::Eda, driver, EDA_RATE_HZ, 0.0)?,
        hr: SensorStream::new(Channel::DerivedHr, hr, TRUTH_HR_RATE_HZ, 0.0)?,
        phasic: SensorStream::new(Channel::Phasic, phasic, EDA_RATE_HZ, 0.0)?,
        truth: GroundTruth { profile: profile.clone(), windows: windows_truth, beat_times_s: beats, driver_spikes: spikes },
        recording,
    })
}

/// Stream ids used when splitting the cohort seed.
const PROFILE_STREAM: u64 = 0;

/// Profiles and recordings for a whole cohort. Profiles come from split
/// stream 0 of `spec.seed`, subject `i` renders from split stream `i + 1`,
/// so subjects render independently (and in parallel) with identical output.
pub fn generate_cohort(spec: &CohortSpec) -> Result<Vec<Rendered>> {
    spec.validate()?;
    let root = Rng::new(spec.seed);
    let profiles = sample_profiles(spec, &mut root.split(PROFILE_STREAM));
    render_profiles(&profiles, spec)
}

/// Render given profiles in parallel with the cohort's seed-splitting scheme.
pub fn render_profiles(profiles: &[SubjectProfile], spec: &CohortSpec) -> Result<Vec<Rendered>> {
    let root = Rng::new(spec.seed);
    std::thread::scope(|s| {
        let handles: Vec<_> = profiles
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let mut rng = root.split(i as u64 + 1);
                s.spawn(move || render_recording(p, spec, &mut rng))
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("render thread panicked")).collect()
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn short_spec(episodes: usize) -> CohortSpec {
        CohortSpec { n_subjects: 2, episodes_per_subject: episodes, ..Default::default() }
    }

    #[test]
    fn single_profile_reproducible() {
        let spec = CohortSpec { n_subjects: 1, ..Default::default() };
        let a = sample_profiles(&spec, &mut Rng::new(3));
        let b = sample_profiles(&spec, &mut Rng::new(3));
        assert_eq!(a.len(), 1);
        assert_eq!(a, b);
    }

    #[test]
    fn profiles_deterministic_and_distinct() {
        let spec = CohortSpec::default();
        let a = sample_profiles(&spec, &mut Rng::new(42));
        assert_eq!(a, sample_profiles(&spec, &mut Rng::new(42)));
        for seed in [1, 2, 3] {
            let b = sample_profiles(&spec, &mut Rng::new(seed));
            for (p, q) in a.iter().zip(&b) {
                assert_ne!(p, q);
            }
        }
        // Enforced spacing: half a bin of the HR range.
        for i in 0..a.len() {
            for j in i + 1..a.len() {
                assert!((a[i].resting_hr_bpm - a[j].resting_hr_bpm).abs() >= 0.5 * 35.0 / 8.0 - 1e-9);
                assert!(a[i].tau_decay_s > a[i].tau_rise_s);
            }
        }
    }

    #[test]
    fn degenerate_driver_gives_pure_tonic() {
        let spec = CohortSpec { noise: NoiseSpec::zero(), ..short_spec(3) };
        let mut p = sample_profiles(&spec, &mut Rng::new(1)).remove(0);
        p.scr_rate_per_min = 0.0;
        let r = render_recording(&p, &spec, &mut Rng::new(5)).unwrap();
        assert!(r.phasic.values().iter().all(|&v| v == 0.0));
        assert!(r.truth.driver_spikes.is_empty());
        let eda = r.recording.stream(Channel::Eda).unwrap().values();
        let lo = p.tonic_level_us * 0.95 - 1e-12;
        let hi = p.tonic_level_us * 1.05 + 1e-12;
        assert!(eda.iter().all(|v| (lo..=hi).contains(v)));
    }

    #[test]
    fn episode_count_and_labels() {
        let spec = short_spec(5);
        let p = sample_profiles(&spec, &mut Rng::new(2)).remove(0);
        let r = render_recording(&p, &spec, &mut Rng::new(9)).unwrap();
        assert_eq!(r.windows.len(), 5);
        assert!(r.windows.iter().all(|w| usize::from(w.gesture_label) < N_GESTURES));
        let mut seen: Vec<u8> = r.windows.iter().map(|w| w.gesture_label).collect();
        seen.sort_unstable();
        seen.dedup();
        assert_eq!(seen.len(), 5);
        for pair in r.truth.windows.windows(2) {
            assert!(pair[1].start_s - pair[0].end_s >= 3.0);
        }
    }

    #[test]
    fn resting_heart_period_matches_profile() {
        let spec = CohortSpec { noise: NoiseSpec::zero(), ..short_spec(1) };
        let mut p = sample_profiles(&spec, &mut Rng::new(4)).remove(0);
        p.resting_hr_bpm = 60.0;
        let r = render_recording(&p, &spec, &mut Rng::new(4)).unwrap();
        let b = &r.truth.beat_times_s;
        let mean = (b[b.len() - 1] - b[0]) / (b.len() - 1) as f64;
        assert!((mean - 1.0).abs() < 0.02, "{mean}");
        // Peak count oracle on the rendered waveform.
        let ppg = r.recording.stream(Channel::Ppg).unwrap().values();
        let peaks = (1..ppg.len() - 1).filter(|&k| ppg[k] > ppg[k - 1] && ppg[k] >= ppg[k + 1] && ppg[k] > 0.7).count();
        let expected = r.recording.stream(Channel::Ppg).unwrap().duration_s();
        assert!((peaks as f64 - expected).abs() <= 3.0, "{peaks} vs {expected}");
    }

    #[test]
    fn cohort_is_bitwise_deterministic() {
        let spec = CohortSpec { n_subjects: 3, episodes_per_subject: 4, ..Default::default() };
        let a = generate_cohort(&spec).unwrap();
        let b = generate_cohort(&spec).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.recording, y.recording);
            assert_eq!(x.truth, y.truth);
        }
    }
}
