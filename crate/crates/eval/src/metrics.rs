use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Scores of one prediction set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    /// `confusion[truth][prediction]`
    pub confusion: Vec<Vec<u64>>,
    pub top1_accuracy: f64,
    /// One-vs-rest accuracy `(TP + TN) / (TP + TN + FP + FN)` pooled over classes.
    pub paper_accuracy: f64,
}

/// Top-1 and pooled one-vs-rest accuracy of class predictions.
pub fn accuracy_metrics(predictions: &[usize], truths: &[usize], n_classes: usize) -> Result<Metrics> {
    if predictions.len() != truths.len() {
        return Err(Error::LengthMismatch { predictions: predictions.len(), truths: truths.len() });
    }
    if predictions.is_empty() {
        return Err(Error::InsufficientData("no predictions to score".into()));
    }
    if let Some(&c) = predictions.iter().chain(truths).find(|&&c| c >= n_classes) {
        return Err(Error::InsufficientData(format!("class {c} outside 0..{n_classes}")));
    }
    let mut confusion = vec![vec![0u64; n_classes]; n_classes];
    for (&p, &t) in predictions.iter().zip(truths) {
        confusion[t][p] += 1;
    }
    let n = predictions.len() as u64;
    let correct: u64 = (0..n_classes).map(|c| confusion[c][c]).sum();
    // For class c: TP = diag, FP + FN = off-diagonal mass of row and column c,
    // TN = the rest. Summing TP + TN over classes.
    let mut agree = 0u64;
    for c in 0..n_classes {
        let row: u64 = confusion[c].iter().sum();
        let col: u64 = confusion.iter().map(|r| r[c]).sum();
        let tp = confusion[c][c];
        let tn = n - row - col + tp;
        agree += tp + tn;
    }
    Ok(Metrics {
        confusion,
        top1_accuracy: correct as f64 / n as f64,
        paper_accuracy: agree as f64 / (n * n_classes as u64) as f64,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    pub fold: usize,
    pub n_train_windows: usize,
    pub n_test_windows: usize,
    pub top1_accuracy: f64,
    pub paper_accuracy: f64,
    pub loss_curve: Vec<f64>,
    pub runtime_s: f64,
}

/// Cross-validated result of one configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub config_name: String,
    pub encoders: String,
    pub config_hash: String,
    pub n_classes: usize,
    /// Summed over the evaluated folds.
    pub confusion: Vec<Vec<u64>>,
    /// Mean over folds.
    pub top1_accuracy: f64,
    pub paper_accuracy: f64,
    /// Population standard deviation over folds.
    pub top1_std: f64,
    pub paper_std: f64,
    pub folds: Vec<FoldReport>,
    pub runtime_s: f64,
}

impl EvalReport {
    /// Equality ignoring wall-clock fields.
    pub fn same_results(&self, other: &Self) -> bool {
        let strip = |r: &Self| {
            let mut r = r.clone();
            r.runtime_s = 0.0;
            r.folds.iter_mut().for_each(|f| f.runtime_s = 0.0);
            r
        };
        strip(self) == strip(other)
    }
}
