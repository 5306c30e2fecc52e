use std::collections::HashMap;
use std::sync::{Arc, Mutex};
use std::thread;

use physiogait_core::synthgen::Rendered;
use physiogait_core::{Channel, Recording};
use physiogait_nn::mmsnn::{EncoderConfig, EncoderKind, ExperimentConfig, Modality, ModalityInput, Sample, SeqNorm};
use serde::{Deserialize, Serialize};

use crate::derive::derive_channels;
use crate::error::{Error, Result};
use crate::gestures::labelled_detections;
use crate::Labelled;

/// Where gesture windows come from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WindowSource {
    /// The generator's true gesture spans.
    Truth,
    /// Detector output, labelled by the best-overlapping true gesture (IoU at
    /// least 0.5); unmatched detections are dropped.
    Detected,
}

/// One labelled gesture window of one subject, as accelerometer sample bounds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowRef {
    pub subject: usize,
    pub gesture: u8,
    pub start_sample: usize,
    pub end_sample: usize,
}

type CacheKey = (EncoderConfig, usize, SeqNorm);

/// Recordings with derived channels plus the windows cut from them. Encoded
/// inputs are built on demand per encoder and cached.
pub struct Dataset {
    pub subjects: Vec<String>,
    pub recordings: Vec<Recording>,
    pub windows: Vec<WindowRef>,
    /// Worker threads for input encoding; results do not depend on it.
    pub threads: usize,
    cache: Mutex<HashMap<CacheKey, Arc<Vec<ModalityInput>>>>,
}

fn channel_of(m: Modality) -> Channel {
    match m {
        Modality::Acc => Channel::AccX,
        Modality::Ppg => Channel::Ppg,
        Modality::Hr => Channel::DerivedHr,
        Modality::Br => Channel::DerivedBr,
        Modality::Eda => Channel::Eda,
        Modality::Ibi => Channel::DerivedIbi,
        Modality::Temp => Channel::Temp,
    }
}

impl Dataset {
    /// `recordings[i]` belongs to subject `i` and must already carry the
    /// derived channels the encoders will ask for.
    pub fn new(recordings: Vec<Recording>, windows: Vec<WindowRef>) -> Result<Self> {
        if let Some(w) = windows.iter().find(|w| w.subject >= recordings.len()) {
            return Err(Error::InsufficientData(format!("window refers to subject {} of {}", w.subject, recordings.len())));
        }
        let subjects = recordings.iter().map(|r| r.subject_id.clone()).collect();
        Ok(Self { subjects, recordings, windows, threads: 1, cache: Mutex::new(HashMap::new()) })
    }

    /// Derive PPG channels for every subject and cut windows from `source`.
    pub fn from_labelled(subjects: &[Labelled], source: WindowSource) -> Result<Self> {
        let mut recordings = Vec::with_capacity(subjects.len());
        let mut windows = Vec::new();
        for (s, &(rec, truth)) in subjects.iter().enumerate() {
            recordings.push(derive_channels(rec)?);
            match source {
                WindowSource::Truth => windows.extend(truth.iter().map(|t| WindowRef {
                    subject: s,
                    gesture: t.label,
                    start_sample: t.start_sample,
                    end_sample: t.end_sample,
                })),
                WindowSource::Detected => {
                    let (found, _) = labelled_detections(rec, truth)?;
                    windows.extend(found.into_iter().map(|(a, b, label)| WindowRef {
                        subject: s,
                        gesture: label,
                        start_sample: a,
                        end_sample: b,
                    }));
                }
            }
        }
        Self::new(recordings, windows)
    }

    pub fn from_cohort(cohort: &[Rendered], source: WindowSource) -> Result<Self> {
        Self::from_labelled(&crate::labelled(cohort), source)
    }

    pub fn n_classes(&self) -> usize {
        self.subjects.len()
    }

    pub fn window_subjects(&self) -> Vec<usize> {
        self.windows.iter().map(|w| w.subject).collect()
    }

    fn encode(&self, w: &WindowRef, enc: EncoderConfig, seq_len: usize, norm: SeqNorm) -> Result<ModalityInput> {
        let rec = &self.recordings[w.subject];
        let (a, b) = (w.start_sample, w.end_sample);
        let acc = rec.stream(Channel::AccX)?;
        if b > acc.len() || b < a + 2 {
            return Err(Error::InsufficientData(format!("window {a}..{b} outside the accelerometer stream")));
        }
        let (t0, t1) = (acc.time_of(a), acc.time_of(b - 1));
        let count = match enc.kind {
            EncoderKind::Cnn => b - a,
            EncoderKind::Lstm => seq_len,
        };
        let channels: Vec<Vec<f64>> = if enc.modality == Modality::Acc {
            [Channel::AccX, Channel::AccY, Channel::AccZ]
                .iter()
                .map(|&c| Ok(rec.stream(c)?.values()[a..b].to_vec()))
                .collect::<Result<_>>()?
        } else {
            vec![rec.stream(channel_of(enc.modality))?.sample_span(t0, t1, count)]
        };
        let refs: Vec<&[f64]> = channels.iter().map(Vec::as_slice).collect();
        Ok(match enc.kind {
            EncoderKind::Cnn => ModalityInput::image(&refs)?,
            EncoderKind::Lstm => ModalityInput::sequence(&refs, seq_len, norm)?,
        })
    }

    /// Inputs for encoder `enc` of every window, in window order.
    pub fn inputs(&self, enc: EncoderConfig, seq_len: usize, norm: SeqNorm) -> Result<Arc<Vec<ModalityInput>>> {
        let key = (enc, seq_len, norm);
        if let Some(v) = self.cache.lock().expect("cache lock").get(&key) {
            return Ok(Arc::clone(v));
        }
        let threads = self.threads.max(1).min(self.windows.len().max(1));
        let chunk = self.windows.len().div_ceil(threads).max(1);
        let parts: Vec<Result<Vec<ModalityInput>>> = thread::scope(|s| {
            let handles: Vec<_> = self
                .windows
                .chunks(chunk)
                .map(|ws| s.spawn(move || ws.iter().map(|w| self.encode(w, enc, seq_len, norm)).collect()))
                .collect();
            handles.into_iter().map(|h| h.join().expect("encoder thread panicked")).collect()
        });
        let mut all = Vec::with_capacity(self.windows.len());
        for p in parts {
            all.extend(p?);
        }
        let all = Arc::new(all);
        self.cache.lock().expect("cache lock").insert(key, Arc::clone(&all));
        Ok(all)
    }

    /// Model samples for windows `idx` under `cfg`'s encoders.
    pub fn samples(&self, cfg: &ExperimentConfig, idx: &[usize]) -> Result<Vec<Sample>> {
        let per_encoder: Vec<Arc<Vec<ModalityInput>>> =
            cfg.encoders.iter().map(|&e| self.inputs(e, cfg.seq_len, cfg.seq_norm)).collect::<Result<_>>()?;
        Ok(idx
            .iter()
            .map(|&i| Sample {
                identity: self.windows[i].subject,
                gesture: self.windows[i].gesture,
                inputs: per_encoder.iter().map(|v| v[i].clone()).collect(),
            })
            .collect())
    }

    /// Drop cached inputs (images are large).
    pub fn clear_cache(&self) {
        self.cache.lock().expect("cache lock").clear();
    }
}
