use std::time::Instant;

use physiogait_core::gesture::{detect_onsets, features_from_axes, svm_train, RqaParams, SvmModel, SvmParams};
use physiogait_core::synthgen::TruthWindow;
use physiogait_core::{Channel, GestureConfig, Recording, SensorStream};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::Labelled;

pub const MIN_IOU: f64 = 0.5;

/// Intersection over union of two half-open sample ranges.
pub fn iou(a: (usize, usize), b: (usize, usize)) -> f64 {
    let inter = a.1.min(b.1).saturating_sub(a.0.max(b.0)) as f64;
    let union = (a.1.max(b.1) - a.0.min(b.0)) as f64;
    if union > 0.0 { inter / union } else { 0.0 }
}

/// One-to-one matching in descending IoU order, keeping pairs with IoU at
/// least `min_iou`. Returns `(found index, truth index)` sorted by found index.
pub fn match_windows(found: &[(usize, usize)], truth: &[(usize, usize)], min_iou: f64) -> Vec<(usize, usize)> {
    let mut cand: Vec<(f64, usize, usize)> = Vec::new();
    for (i, &f) in found.iter().enumerate() {
        for (j, &t) in truth.iter().enumerate() {
            let s = iou(f, t);
            if s >= min_iou {
                cand.push((s, i, j));
            }
        }
    }
    cand.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let (mut used_f, mut used_t) = (vec![false; found.len()], vec![false; truth.len()]);
    let mut out = Vec::new();
    for (_, i, j) in cand {
        if !used_f[i] && !used_t[j] {
            used_f[i] = true;
            used_t[j] = true;
            out.push((i, j));
        }
    }
    out.sort_unstable();
    out
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DetectionScore {
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
}

impl DetectionScore {
    pub fn add(&mut self, other: &Self) {
        self.true_positives += other.true_positives;
        self.false_positives += other.false_positives;
        self.false_negatives += other.false_negatives;
    }

    pub fn precision(&self) -> f64 {
        ratio(self.true_positives, self.true_positives + self.false_positives)
    }

    pub fn recall(&self) -> f64 {
        ratio(self.true_positives, self.true_positives + self.false_negatives)
    }

    pub fn f1(&self) -> f64 {
        let (p, r) = (self.precision(), self.recall());
        if p + r > 0.0 { 2.0 * p * r / (p + r) } else { 0.0 }
    }
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 { 0.0 } else { a as f64 / b as f64 }
}

fn acc_axes(rec: &Recording) -> Result<[&SensorStream; 3]> {
    Ok([rec.stream(Channel::AccX)?, rec.stream(Channel::AccY)?, rec.stream(Channel::AccZ)?])
}

/// Gesture spans of a recording with the default detector settings.
pub fn detect_recording(rec: &Recording) -> Result<Vec<(usize, usize)>> {
    Ok(detect_onsets(acc_axes(rec)?, &RqaParams::default(), &GestureConfig::default())?)
}

/// Detected spans that match a true gesture, labelled with that gesture, plus
/// the detection score against `truth`.
pub fn labelled_detections(rec: &Recording, truth: &[TruthWindow]) -> Result<(Vec<(usize, usize, u8)>, DetectionScore)> {
    let found = detect_recording(rec)?;
    let spans: Vec<(usize, usize)> = truth.iter().map(|t| (t.start_sample, t.end_sample)).collect();
    let matched = match_windows(&found, &spans, MIN_IOU);
    let score = DetectionScore {
        true_positives: matched.len(),
        false_positives: found.len() - matched.len(),
        false_negatives: truth.len() - matched.len(),
    };
    Ok((matched.iter().map(|&(i, j)| (found[i].0, found[i].1, truth[j].label)).collect(), score))
}

/// 117-dim gesture features of samples `start..end`.
pub fn window_features(rec: &Recording, start: usize, end: usize) -> Result<Vec<f64>> {
    let [x, y, z] = acc_axes(rec)?;
    let axes = [&x.values()[start..end], &y.values()[start..end], &z.values()[start..end]];
    Ok(features_from_axes(axes)?.to_vec())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GestureReport {
    pub detection: DetectionScore,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Mean per-class recall on the held-out windows.
    pub svm_macro_accuracy: f64,
    pub svm_accuracy: f64,
    pub n_train: usize,
    pub n_test: usize,
    pub runtime_s: f64,
}

/// Mean per-class recall over the classes present in `truths`.
pub fn macro_accuracy(predictions: &[u8], truths: &[u8]) -> f64 {
    let mut classes: Vec<u8> = truths.to_vec();
    classes.sort_unstable();
    classes.dedup();
    let recalls: Vec<f64> = classes
        .iter()
        .map(|&c| {
            let idx: Vec<usize> = (0..truths.len()).filter(|&i| truths[i] == c).collect();
            idx.iter().filter(|&&i| predictions[i] == c).count() as f64 / idx.len() as f64
        })
        .collect();
    recalls.iter().sum::<f64>() / recalls.len().max(1) as f64
}

/// Detect gestures on every subject, score them against the truth, then train
/// the gesture SVM on matched detections and test it on every fifth matched
/// window per subject (in time order).
pub fn gesture_pipeline(subjects: &[Labelled], params: &SvmParams) -> Result<(GestureReport, SvmModel)> {
    let start = Instant::now();
    let mut score = DetectionScore::default();
    let (mut train_x, mut train_y, mut test_x, mut test_y) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for &(rec, truth) in subjects {
        let (windows, s) = labelled_detections(rec, truth)?;
        score.add(&s);
        for (k, &(a, b, label)) in windows.iter().enumerate() {
            let f = window_features(rec, a, b)?;
            if k % 5 == 4 {
                test_x.push(f);
                test_y.push(label);
            } else {
                train_x.push(f);
                train_y.push(label);
            }
        }
    }
    if train_x.is_empty() || test_x.is_empty() {
        return Err(Error::InsufficientData("no matched gesture windows".into()));
    }
    let model = svm_train(&train_x, &train_y, params)?;
    let pred: Vec<u8> = test_x.iter().map(|x| model.predict(x).0).collect();
    let correct = pred.iter().zip(&test_y).filter(|(a, b)| a == b).count();
    let report = GestureReport {
        detection: score,
        precision: score.precision(),
        recall: score.recall(),
        f1: score.f1(),
        svm_macro_accuracy: macro_accuracy(&pred, &test_y),
        svm_accuracy: correct as f64 / test_y.len() as f64,
        n_train: train_y.len(),
        n_test: test_y.len(),
        runtime_s: start.elapsed().as_secs_f64(),
    };
    Ok((report, model))
}
