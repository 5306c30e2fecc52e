//! Experiment layer: turns cohorts into labelled windows, runs cross-validated
//! re-identification experiments and writes their reports.

pub mod cohort;
pub mod dataset;
pub mod derive;
pub mod error;
pub mod experiment;
pub mod folds;
pub mod gestures;
pub mod metrics;
pub mod report;

use physiogait_core::synthgen::{Rendered, TruthWindow};
use physiogait_core::Recording;

pub use cohort::{read_cohort, write_cohort, CohortMember};
pub use dataset::{Dataset, WindowRef, WindowSource};
pub use error::{Error, Result};
pub use experiment::{episode_sweep, run_ablation, run_config, AblationOptions, SweepRow};
pub use metrics::{accuracy_metrics, EvalReport, FoldReport, Metrics};

/// A recording with its true gesture windows.
pub type Labelled<'a> = (&'a Recording, &'a [TruthWindow]);

pub fn labelled(cohort: &[Rendered]) -> Vec<Labelled<'_>> {
    cohort.iter().map(|r| (&r.recording, r.truth.windows.as_slice())).collect()
}
