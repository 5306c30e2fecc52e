use std::time::Instant;

use physiogait_core::{stats, Rng};
use physiogait_nn::mmsnn::{make_pairs, ExperimentConfig, Sample};
use physiogait_nn::Mmsnn32;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::folds::{stratified_folds, train_indices};
use crate::metrics::{accuracy_metrics, EvalReport, FoldReport};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationOptions {
    pub folds: usize,
    /// Evaluate only the first this-many folds (all when `None`).
    pub max_folds: Option<usize>,
    /// Seed of the fold assignment, shared by every configuration.
    pub fold_seed: u64,
}

impl Default for AblationOptions {
    fn default() -> Self {
        Self { folds: 5, max_folds: None, fold_seed: 42 }
    }
}

fn population_std(v: &[f64]) -> f64 {
    if v.len() < 2 { 0.0 } else { stats::variance_pop(v).sqrt() }
}

/// Train on the complement of `test` and score identity predictions on `test`.
fn run_fold(ds: &Dataset, cfg: &ExperimentConfig, fold: usize, test: &[usize]) -> Result<(FoldReport, Vec<Vec<u64>>)> {
    let start = Instant::now();
    let train = train_indices(ds.windows.len(), test);
    let train_samples = ds.samples(cfg, &train)?;
    let test_samples = ds.samples(cfg, test)?;
    let root = Rng::new(cfg.seed).split(fold as u64 + 1);
    let keys: Vec<(usize, u8)> = train_samples.iter().map(|s| (s.identity, s.gesture)).collect();
    let pairs = make_pairs(&keys, cfg.episodes, cfg.ratio_similar, &mut root.split(1))?;
    let mut model = Mmsnn32::new(cfg.clone(), ds.n_classes(), &mut root.split(2))?;
    let curve = model.train(&train_samples, &pairs, &mut root.split(3))?;
    let refs: Vec<&Sample> = test_samples.iter().collect();
    let preds: Vec<usize> = model.predict_batch(&refs)?.into_iter().map(|(c, _)| c).collect();
    let truths: Vec<usize> = test_samples.iter().map(|s| s.identity).collect();
    let m = accuracy_metrics(&preds, &truths, ds.n_classes())?;
    let report = FoldReport {
        fold,
        n_train_windows: train.len(),
        n_test_windows: test.len(),
        top1_accuracy: m.top1_accuracy,
        paper_accuracy: m.paper_accuracy,
        loss_curve: curve,
        runtime_s: start.elapsed().as_secs_f64(),
    };
    log::info!("{} fold {fold}: top-1 {:.4} ({:.1} s)", cfg.name, report.top1_accuracy, report.runtime_s);
    Ok((report, m.confusion))
}

/// Cross-validated identity accuracy of one configuration.
pub fn run_config(ds: &Dataset, cfg: &ExperimentConfig, opts: &AblationOptions) -> Result<EvalReport> {
    cfg.validate()?;
    let start = Instant::now();
    let folds = stratified_folds(&ds.window_subjects(), opts.folds, &mut Rng::new(opts.fold_seed))?;
    let n_run = opts.max_folds.unwrap_or(opts.folds).clamp(1, opts.folds);
    let k = ds.n_classes();
    let mut confusion = vec![vec![0u64; k]; k];
    let mut reports = Vec::with_capacity(n_run);
    for (f, test) in folds.iter().enumerate().take(n_run) {
        let (r, c) = run_fold(ds, cfg, f, test)?;
        for (row, crow) in confusion.iter_mut().zip(c) {
            row.iter_mut().zip(crow).for_each(|(a, b)| *a += b);
        }
        reports.push(r);
    }
    let top1: Vec<f64> = reports.iter().map(|r| r.top1_accuracy).collect();
    let paper: Vec<f64> = reports.iter().map(|r| r.paper_accuracy).collect();
    Ok(EvalReport {
        config_name: cfg.name.clone(),
        encoders: cfg.encoder_label(),
        config_hash: cfg.hash(),
        n_classes: k,
        confusion,
        top1_accuracy: stats::mean(&top1),
        paper_accuracy: stats::mean(&paper),
        top1_std: population_std(&top1),
        paper_std: population_std(&paper),
        folds: reports,
        runtime_s: start.elapsed().as_secs_f64(),
    })
}

/// One report per configuration, in input order, over shared folds.
pub fn run_ablation(ds: &Dataset, configs: &[ExperimentConfig], opts: &AblationOptions) -> Result<Vec<EvalReport>> {
    configs.iter().map(|c| run_config(ds, c, opts)).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub episodes: usize,
    pub top1_mean: f64,
    pub top1_std: f64,
}

/// Identity accuracy against the number of training pairs, sorted by episodes.
pub fn episode_sweep(ds: &Dataset, cfg: &ExperimentConfig, grid: &[usize], opts: &AblationOptions) -> Result<Vec<SweepRow>> {
    if grid.is_empty() || grid.contains(&0) {
        return Err(Error::InsufficientData("episode grid must be non-empty and positive".into()));
    }
    let mut grid = grid.to_vec();
    grid.sort_unstable();
    grid.dedup();
    grid.iter()
        .map(|&episodes| {
            let c = ExperimentConfig { episodes, name: format!("{}@{episodes}", cfg.name), ..cfg.clone() };
            let r = run_config(ds, &c, opts)?;
            Ok(SweepRow { episodes, top1_mean: r.top1_accuracy, top1_std: r.top1_std })
        })
        .collect()
}
