//! Report files: CSV (one row per configuration and fold), a JSON summary, and
//! `x,y,err` plot data.

use std::path::Path;

use physiogait_core::container::write_atomic;

use crate::error::Result;
use crate::experiment::SweepRow;
use crate::metrics::EvalReport;

pub fn ablation_csv(reports: &[EvalReport]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["config", "encoders", "config_hash", "fold", "top1_accuracy", "paper_accuracy", "n_train", "n_test", "final_loss", "runtime_s"])?;
    for r in reports {
        for f in &r.folds {
            w.write_record([
                r.config_name.clone(),
                r.encoders.clone(),
                r.config_hash.clone(),
                f.fold.to_string(),
                f.top1_accuracy.to_string(),
                f.paper_accuracy.to_string(),
                f.n_train_windows.to_string(),
                f.n_test_windows.to_string(),
                f.loss_curve.last().map_or(String::new(), |l| l.to_string()),
                format!("{:.3}", f.runtime_s),
            ])?;
        }
    }
    Ok(String::from_utf8(w.into_inner().map_err(|e| csv::Error::from(e.into_error()))?).expect("csv is UTF-8"))
}

pub fn sweep_csv(rows: &[SweepRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["episodes", "top1_mean", "top1_std"])?;
    for r in rows {
        w.write_record([r.episodes.to_string(), r.top1_mean.to_string(), r.top1_std.to_string()])?;
    }
    Ok(String::from_utf8(w.into_inner().map_err(|e| csv::Error::from(e.into_error()))?).expect("csv is UTF-8"))
}

/// `x,y,err` lines: episodes, mean top-1, std.
pub fn sweep_plot_data(rows: &[SweepRow]) -> String {
    rows.iter().map(|r| format!("{},{},{}\n", r.episodes, r.top1_mean, r.top1_std)).collect()
}

/// `x,y,err` lines: row index, mean top-1, std; the config name follows as a comment.
pub fn ablation_plot_data(reports: &[EvalReport]) -> String {
    reports
        .iter()
        .enumerate()
        .map(|(i, r)| format!("{i},{},{} # {}\n", r.top1_accuracy, r.top1_std, r.config_name))
        .collect()
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    Ok(write_atomic(path, text.as_bytes())?)
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text(path, &text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::FoldReport;

    fn report() -> EvalReport {
        EvalReport {
            config_name: "P1".into(),
            encoders: "CNN:ACC".into(),
            config_hash: "ab".into(),
            n_classes: 2,
            confusion: vec![vec![3, 1], vec![0, 4]],
            top1_accuracy: 7.0 / 8.0,
            paper_accuracy: 0.1 + 0.2,
            top1_std: 0.0,
            paper_std: 1.0 / 3.0,
            folds: vec![FoldReport {
                fold: 0,
                n_train_windows: 32,
                n_test_windows: 8,
                top1_accuracy: 7.0 / 8.0,
                paper_accuracy: 0.1 + 0.2,
                loss_curve: vec![2.5, std::f64::consts::PI],
                runtime_s: 1.25,
            }],
            runtime_s: 1.5,
        }
    }

    #[test]
    fn json_round_trip_is_lossless() {
        let r = report();
        let text = serde_json::to_string(&r).unwrap();
        assert_eq!(serde_json::from_str::<EvalReport>(&text).unwrap(), r);
    }

    #[test]
    fn csv_has_one_row_per_fold() {
        let text = ablation_csv(&[report(), report()]).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert!(text.lines().nth(1).unwrap().starts_with("P1,CNN:ACC,ab,0,0.875,"));
    }

    #[test]
    fn sweep_outputs() {
        let rows = [SweepRow { episodes: 50, top1_mean: 0.5, top1_std: 0.1 }];
        assert_eq!(sweep_plot_data(&rows), "50,0.5,0.1\n");
        assert_eq!(sweep_csv(&rows).unwrap(), "episodes,top1_mean,top1_std\n50,0.5,0.1\n");
    }
}
