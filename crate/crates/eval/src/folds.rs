use physiogait_core::Rng;

use crate::error::{Error, Result};

/// Stratified k-fold over windows labelled by subject: each subject's windows
/// are shuffled and dealt round-robin into `k` folds, so every subject appears
/// in every training split. Returns the test indices of each fold.
pub fn stratified_folds(subjects: &[usize], k: usize, rng: &mut Rng) -> Result<Vec<Vec<usize>>> {
    if k < 2 {
        return Err(Error::InsufficientData(format!("need at least 2 folds, got {k}")));
    }
    let n_subjects = subjects.iter().max().map_or(0, |m| m + 1);
    let mut per: Vec<Vec<usize>> = vec![Vec::new(); n_subjects];
    for (i, &s) in subjects.iter().enumerate() {
        per[s].push(i);
    }
    let mut folds = vec![Vec::new(); k];
    let mut dealt = 0;
    for (s, idx) in per.iter_mut().enumerate() {
        if idx.is_empty() {
            continue;
        }
        if idx.len() < k {
            return Err(Error::InsufficientData(format!("subject {s} has {} windows for {k} folds", idx.len())));
        }
        rng.shuffle(idx);
        // Continue the deal where the previous subject stopped, so fold sizes
        // differ by at most one.
        for &i in idx.iter() {
            folds[dealt % k].push(i);
            dealt += 1;
        }
    }
    folds.iter_mut().for_each(|f| f.sort_unstable());
    Ok(folds)
}

/// Complement of `test` within `0..n`.
pub fn train_indices(n: usize, test: &[usize]) -> Vec<usize> {
    let mut mark = vec![false; n];
    test.iter().for_each(|&i| mark[i] = true);
    (0..n).filter(|&i| !mark[i]).collect()
}
