use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::Recording;
use crate::stream::{Channel, SensorStream};

/// Number of gesture classes in the dictionary.
pub const N_GESTURES: usize = 12;
/// Shortest admissible gesture window, in accelerometer samples.
pub const MIN_WINDOW_SAMPLES: usize = 16;

/// Sliding-window settings for the accelerometer gesture stage.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GestureConfig {
    pub window_len_samples: usize,
    pub overlap_fraction: f64,
    pub acc_rate_hz: f64,
    pub n_classes: usize,
}

impl Default for GestureConfig {
    fn default() -> Self {
        Self { window_len_samples: 80, overlap_fraction: 0.8, acc_rate_hz: 32.0, n_classes: N_GESTURES }
    }
}

impl GestureConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.overlap_fraction) {
            return Err(Error::InvalidParameter(format!("overlap_fraction {} not in [0,1)", self.overlap_fraction)));
        }
        if self.window_len_samples < 8 {
            return Err(Error::InvalidParameter("window_len_samples must be >= 8".into()));
        }
        if !(self.acc_rate_hz > 0.0) || self.n_classes < 2 {
            return Err(Error::InvalidParameter("acc_rate_hz must be positive and n_classes >= 2".into()));
        }
        Ok(())
    }

    /// Hop between consecutive windows: `window * (1 - overlap)`, at least 1.
    pub fn hop_samples(&self) -> usize {
        ((self.window_len_samples as f64 * (1.0 - self.overlap_fraction)).round() as usize).max(1)
    }
}

/// A localized gesture episode with every modality cut to the same wall-clock span.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GestureWindow {
    pub subject_id: String,
    pub gesture_label: u8,
    /// Index into the 32 Hz accelerometer stream.
    pub start_sample: usize,
    /// Exclusive end index.
    pub end_sample: usize,
    pub modality_slices: BTreeMap<Channel, SensorStream>,
}

impl GestureWindow {
    /// Cut every stream of `recording` to the wall-clock span of accelerometer
    /// samples `start_sample..end_sample`.
    pub fn from_recording(recording: &Recording, gesture_label: u8, start_sample: usize, end_sample: usize) -> Result<Self> {
        if usize::from(gesture_label) >= N_GESTURES {
            return Err(Error::InvalidParameter(format!("gesture label {gesture_label} out of range")));
        }
        let have = end_sample.saturating_sub(start_sample);
        if have < MIN_WINDOW_SAMPLES {
            return Err(Error::WindowTooShort { needed: MIN_WINDOW_SAMPLES, got: have });
        }
        let acc = recording.stream(Channel::AccX)?;
        if end_sample > acc.len() {
            return Err(Error::NoOverlap);
        }
        let (t0, t1) = (acc.time_of(start_sample), acc.time_of(end_sample));
        let mut modality_slices = BTreeMap::new();
        for (&ch, s) in &recording.streams {
            let slice = if matches!(ch, Channel::AccX | Channel::AccY | Channel::AccZ) {
                s.slice_samples(start_sample, end_sample)?
            } else {
                match s.slice_by_time(t0, t1) {
                    Ok(slice) => slice,
                    // Coarse channels may hold no sample inside a short span.
                    Err(Error::NoOverlap) => continue,
                    Err(e) => return Err(e),
                }
            };
            modality_slices.insert(ch, slice);
        }
        Ok(Self { subject_id: recording.subject_id.clone(), gesture_label, start_sample, end_sample, modality_slices })
    }

    pub fn len_samples(&self) -> usize {
        self.end_sample - self.start_sample
    }

    /// The three accelerometer axis slices, in x, y, z order.
    pub fn acc_axes(&self) -> Result<[&[f64]; 3]> {
        let get = |c: Channel| {
            self.modality_slices
                .get(&c)
                .map(|s| s.values())
                .ok_or_else(|| Error::MissingChannel(c.to_string()))
        };
        Ok([get(Channel::AccX)?, get(Channel::AccY)?, get(Channel::AccZ)?])
    }
}
