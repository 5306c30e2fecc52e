use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RqaParams {
    pub embed_dim: usize,
    /// Embedding delay in samples.
    pub delay: usize,
    /// Recurrence threshold as a quantile of all pairwise distances.
    pub epsilon_quantile: f64,
    /// Shortest diagonal line counted towards determinism.
    pub l_min: usize,
}

impl Default for RqaParams {
    fn default() -> Self {
        Self { embed_dim: 3, delay: 2, epsilon_quantile: 0.10, l_min: 2 }
    }
}

impl RqaParams {
    pub fn validate(&self) -> Result<()> {
        if self.embed_dim < 1 || self.delay < 1 || !(self.epsilon_quantile > 0.0 && self.epsilon_quantile < 1.0) {
            return Err(Error::InvalidParameter(format!("invalid RQA parameters {self:?}")));
        }
        Ok(())
    }

    pub fn min_window(&self) -> usize {
        self.embed_dim * self.delay + 2
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RqaMeasures {
    pub recurrence_rate: f64,
    pub determinism: f64,
}

/// Recurrence rate and determinism of a delay-embedded window. The main
/// diagonal is excluded from both. A window whose embedded points all coincide
/// is fully recurrent and deterministic by convention.
pub fn rqa_measures(window: &[f64], params: &RqaParams) -> Result<RqaMeasures> {
    params.validate()?;
    if window.len() < params.min_window() {
        return Err(Error::WindowTooShort { needed: params.min_window(), got: window.len() });
    }
    let span = (params.embed_dim - 1) * params.delay;
    let n = window.len() - span;
    let point = |i: usize| (0..params.embed_dim).map(move |k| window[i + k * params.delay]);

    let mut dist = vec![0.0; n * n];
    let mut upper = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            let d = point(i).zip(point(j)).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            dist[i * n + j] = d;
            dist[j * n + i] = d;
            upper.push(d);
        }
    }
    if upper.iter().all(|&d| d == 0.0) {
        return Ok(RqaMeasures { recurrence_rate: 1.0, determinism: 1.0 });
    }
    let eps = crate::stats::quantile_in_place(&mut upper, params.epsilon_quantile);

    let mut recurrent = 0usize;
    let mut on_lines = 0usize;
    // Diagonals above the main one; the matrix is symmetric so counts double.
    for k in 1..n {
        let mut run = 0usize;
        for i in 0..n - k {
            if dist[i * n + i + k] <= eps {
                recurrent += 1;
                run += 1;
            } else {
                if run >= params.l_min {
                    on_lines += run;
                }
                run = 0;
            }
        }
        if run >= params.l_min {
            on_lines += run;
        }
    }
    let rr = 2.0 * recurrent as f64 / (n * (n - 1)) as f64;
    let det = if recurrent == 0 { 0.0 } else { on_lines as f64 / recurrent as f64 };
    Ok(RqaMeasures { recurrence_rate: rr, determinism: det })
}
