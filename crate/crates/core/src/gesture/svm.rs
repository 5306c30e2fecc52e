//! One-vs-one RBF support vector machines trained by sequential minimal
//! optimization with maximal-violating-pair working-set selection.

use serde::{Deserialize, Serialize};

use crate::container::{Block, Container};
use crate::error::{Error, Result};
use crate::window::N_GESTURES;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SvmParams {
    pub c: f64,
    /// RBF width; `None` uses `1 / (dim * mean feature variance)` after standardization.
    pub gamma: Option<f64>,
    /// KKT tolerance on the maximal violating pair.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SvmParams {
    fn default() -> Self {
        Self { c: 10.0, gamma: None, tol: 1e-3, max_iter: 100_000 }
    }
}

/// A trained binary machine: positive side `class_a`, negative `class_b`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BinarySvm {
    pub class_a: u8,
    pub class_b: u8,
    /// Standardized support vectors.
    pub support: Vec<Vec<f64>>,
    /// Dual coefficients in `[0, C]`.
    pub alpha: Vec<f64>,
    /// Labels (+1 / -1) of the support vectors.
    pub label: Vec<f64>,
    pub rho: f64,
    /// Final maximal KKT violation.
    pub kkt_gap: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SvmModel {
    pub n_classes: usize,
    pub gamma: f64,
    pub c: f64,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub machines: Vec<BinarySvm>,
}

fn rbf(a: &[f64], b: &[f64], gamma: f64) -> f64 {
    let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    (-gamma * d2).exp()
}

pub(crate) struct Solution {
    pub alpha: Vec<f64>,
    pub rho: f64,
    pub gap: f64,
}

/// Maximal KKT violation `m(alpha) - M(alpha)` for gradient `grad = Q alpha - e`.
pub(crate) fn kkt_gap(alpha: &[f64], y: &[f64], grad: &[f64], c: f64) -> (f64, Option<usize>, Option<usize>) {
    let mut up = (f64::NEG_INFINITY, None);
    let mut low = (f64::INFINITY, None);
    for t in 0..alpha.len() {
        let v = -y[t] * grad[t];
        let in_up = (y[t] > 0.0 && alpha[t] < c) || (y[t] < 0.0 && alpha[t] > 0.0);
        let in_low = (y[t] > 0.0 && alpha[t] > 0.0) || (y[t] < 0.0 && alpha[t] < c);
        if in_up && v > up.0 {
            up = (v, Some(t));
        }
        if in_low && v < low.0 {
            low = (v, Some(t));
        }
    }
    (up.0 - low.0, up.1, low.1)
}

/// Solve the binary dual on a precomputed kernel (row-major `n x n`).
pub(crate) fn smo(kernel: &[f64], y: &[f64], c: f64, tol: f64, max_iter: usize) -> Solution {
    let n = y.len();
    let q = |i: usize, j: usize| y[i] * y[j] * kernel[i * n + j];
    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    for _ in 0..max_iter {
        let (gap, Some(i), Some(j)) = kkt_gap(&alpha, y, &grad, c) else { break };
        if gap < tol {
            break;
        }
        let (old_i, old_j) = (alpha[i], alpha[j]);
        let quad = (kernel[i * n + i] + kernel[j * n + j] - 2.0 * kernel[i * n + j]).max(1e-12);
        if y[i] != y[j] {
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
        for t in 0..n {
            grad[t] += q(t, i) * di + q(t, j) * dj;
        }
    }
    let (gap, _, _) = kkt_gap(&alpha, y, &grad, c);

    // rho: average over free vectors, else the midpoint of the feasible interval.
    let (mut sum, mut count) = (0.0, 0usize);
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    for t in 0..n {
        let yg = y[t] * grad[t];
        if alpha[t] > 0.0 && alpha[t] < c {
            sum += yg;
            count += 1;
        } else if (y[t] > 0.0 && alpha[t] >= c) || (y[t] < 0.0 && alpha[t] <= 0.0) {
            lb = lb.max(yg);
        } else {
            ub = ub.min(yg);
        }
    }
    let rho = if count > 0 { sum / count as f64 } else { 0.5 * (ub + lb) };
    Solution { alpha, rho, gap }
}

impl BinarySvm {
    pub fn decision(&self, z: &[f64], gamma: f64) -> f64 {
        self.support
            .iter()
            .zip(&self.alpha)
            .zip(&self.label)
            .map(|((sv, a), y)| a * y * rbf(sv, z, gamma))
            .sum::<f64>()
            - self.rho
    }
}

/// Train one-vs-one machines over every pair of classes present in `labels`.
/// Features are standardized with the training mean and standard deviation.
pub fn svm_train(features: &[Vec<f64>], labels: &[u8], params: &SvmParams) -> Result<SvmModel> {
    if features.len() != labels.len() || features.is_empty() {
        return Err(Error::DegenerateTrainingSet("features and labels must be non-empty and equal in length".into()));
    }
    let dim = features[0].len();
    if features.iter().any(|f| f.len() != dim) {
        return Err(Error::DegenerateTrainingSet("inconsistent feature dimension".into()));
    }
    let mut counts = [0usize; N_GESTURES];
    for &l in labels {
        let slot = counts
            .get_mut(usize::from(l))
            .ok_or_else(|| Error::DegenerateTrainingSet(format!("label {l} out of range")))?;
        *slot += 1;
    }
    let present: Vec<u8> = (0..N_GESTURES as u8).filter(|&c| counts[usize::from(c)] > 0).collect();
    if present.len() < 2 {
        return Err(Error::DegenerateTrainingSet("need at least two classes".into()));
    }
    if let Some(&c) = present.iter().find(|&&c| counts[usize::from(c)] < 2) {
        return Err(Error::DegenerateTrainingSet(format!("class {c} has a single sample")));
    }

    let n = features.len() as f64;
    let mean: Vec<f64> = (0..dim).map(|d| features.iter().map(|f| f[d]).sum::<f64>() / n).collect();
    let std: Vec<f64> = (0..dim)
        .map(|d| {
            let v = features.iter().map(|f| (f[d] - mean[d]).powi(2)).sum::<f64>() / n;
            if v > 0.0 { v.sqrt() } else { 1.0 }
        })
        .collect();
    let z: Vec<Vec<f64>> = features
        .iter()
        .map(|f| f.iter().zip(&mean).zip(&std).map(|((x, m), s)| (x - m) / s).collect())
        .collect();
    let gamma = params.gamma.unwrap_or_else(|| {
        let var: f64 = (0..dim)
            .map(|d| z.iter().map(|v| v[d] * v[d]).sum::<f64>() / n)
            .sum::<f64>()
            / dim as f64;
        1.0 / (dim as f64 * if var > 0.0 { var } else { 1.0 })
    });

    let mut machines = Vec::new();
    for (ai, &a) in present.iter().enumerate() {
        for &b in &present[ai + 1..] {
            let idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == a || labels[i] == b).collect();
            let y: Vec<f64> = idx.iter().map(|&i| if labels[i] == a { 1.0 } else { -1.0 }).collect();
            let m = idx.len();
            let mut kernel = vec![0.0; m * m];
            for p in 0..m {
                for q in p..m {
                    let k = rbf(&z[idx[p]], &z[idx[q]], gamma);
                    kernel[p * m + q] = k;
                    kernel[q * m + p] = k;
                }
            }
            let sol = smo(&kernel, &y, params.c, params.tol, params.max_iter);
            let sv: Vec<usize> = (0..m).filter(|&p| sol.alpha[p] > 0.0).collect();
            machines.push(BinarySvm {
                class_a: a,
                class_b: b,
                support: sv.iter().map(|&p| z[idx[p]].clone()).collect(),
                alpha: sv.iter().map(|&p| sol.alpha[p]).collect(),
                label: sv.iter().map(|&p| y[p]).collect(),
                rho: sol.rho,
                kkt_gap: sol.gap,
            });
        }
    }
    Ok(SvmModel { n_classes: N_GESTURES, gamma, c: params.c, mean, std, machines })
}

/// Winning class: most votes, ties to the lowest class index.
pub fn vote_winner(votes: &[u32]) -> u8 {
    let mut best = 0;
    for (i, &v) in votes.iter().enumerate() {
        if v > votes[best] {
            best = i;
        }
    }
    best as u8
}

impl SvmModel {
    pub fn standardize(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.mean).zip(&self.std).map(|((v, m), s)| (v - m) / s).collect()
    }

    /// Predict from an already standardized vector.
    pub fn predict_standardized(&self, z: &[f64]) -> (u8, Vec<u32>) {
        let mut votes = vec![0u32; self.n_classes];
        for m in &self.machines {
            let winner = if m.decision(z, self.gamma) > 0.0 { m.class_a } else { m.class_b };
            votes[usize::from(winner)] += 1;
        }
        (vote_winner(&votes), votes)
    }

    pub fn predict(&self, x: &[f64]) -> (u8, Vec<u32>) {
        self.predict_standardized(&self.standardize(x))
    }

    pub fn to_container(&self) -> Container {
        let machines: Vec<serde_json::Value> = self
            .machines
            .iter()
            .map(|m| serde_json::json!({"class_a": m.class_a, "class_b": m.class_b, "rho": m.rho, "n_support": m.alpha.len(), "kkt_gap": m.kkt_gap}))
            .collect();
        let meta = serde_json::json!({
            "n_classes": self.n_classes,
            "gamma": self.gamma,
            "c": self.c,
            "dim": self.mean.len(),
            "machines": machines,
        });
        let mut c = Container::new("svm", meta);
        c.push(Block::f64("mean", self.mean.clone()));
        c.push(Block::f64("std", self.std.clone()));
        for (i, m) in self.machines.iter().enumerate() {
            c.push(Block::f64(format!("sv{i}"), m.support.concat()));
            c.push(Block::f64(format!("alpha{i}"), m.alpha.clone()));
            c.push(Block::f64(format!("label{i}"), m.label.clone()));
        }
        c
    }

    pub fn from_container(c: &Container) -> Result<Self> {
        if c.kind != "svm" {
            return Err(Error::Container(format!("expected an svm container, found {:?}", c.kind)));
        }
        #[derive(Deserialize)]
        struct M {
            class_a: u8,
            class_b: u8,
            rho: f64,
            kkt_gap: f64,
        }
        #[derive(Deserialize)]
        struct Meta {
            n_classes: usize,
            gamma: f64,
            c: f64,
            dim: usize,
            machines: Vec<M>,
        }
        let meta: Meta = serde_json::from_value(c.meta.clone())?;
        let mut machines = Vec::new();
        for (i, m) in meta.machines.into_iter().enumerate() {
            let sv = c.block(&format!("sv{i}"))?.to_f64();
            machines.push(BinarySvm {
                class_a: m.class_a,
                class_b: m.class_b,
                support: sv.chunks(meta.dim.max(1)).map(<[f64]>::to_vec).collect(),
                alpha: c.block(&format!("alpha{i}"))?.to_f64(),
                label: c.block(&format!("label{i}"))?.to_f64(),
                rho: m.rho,
                kkt_gap: m.kkt_gap,
            });
        }
        Ok(SvmModel {
            n_classes: meta.n_classes,
            gamma: meta.gamma,
            c: meta.c,
            mean: c.block("mean")?.to_f64(),
            std: c.block("std")?.to_f64(),
            machines,
        })
    }
}

/// Convenience wrapper matching [`SvmModel::predict`].
pub fn svm_predict(model: &SvmModel, features: &[f64]) -> (u8, Vec<u32>) {
    model.predict(features)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;

    fn blobs(rng: &mut Rng) -> (Vec<Vec<f64>>, Vec<u8>) {
        let mut x = Vec::new();
        let mut y = Vec::new();
        for i in 0..40 {
            let c = (i % 2) as u8;
            let centre = if c == 0 { -2.0 } else { 2.0 };
            x.push(vec![centre + 0.5 * rng.normal(), centre + 0.5 * rng.normal()]);
            y.push(c);
        }
        (x, y)
    }

    fn accuracy(m: &SvmModel, x: &[Vec<f64>], y: &[u8]) -> f64 {
        x.iter().zip(y).filter(|(f, &l)| m.predict(f).0 == l).count() as f64 / y.len() as f64
    }

    #[test]
    fn separable_blobs() {
        let mut rng = Rng::new(1);
        let (x, y) = blobs(&mut rng);
        let m = svm_train(&x, &y, &SvmParams::default()).unwrap();
        assert_eq!(accuracy(&m, &x, &y), 1.0);
        let sv = &m.machines[0];
        assert!(sv.alpha.iter().all(|&a| (0.0..=m.c).contains(&a)));
        assert!(sv.kkt_gap < 1e-3);
        // A support vector maps back to its own class.
        let raw: Vec<f64> = sv.support[0].iter().zip(&m.std).zip(&m.mean).map(|((z, s), mu)| z * s + mu).collect();
        let own = if sv.label[0] > 0.0 { sv.class_a } else { sv.class_b };
        assert_eq!(m.predict(&raw).0, own);
    }

    #[test]
    fn xor_needs_the_kernel() {
        let mut x = Vec::new();
        let mut y = Vec::new();
        for (i, &(a, b)) in [(0.0, 0.0), (1.0, 1.0), (0.0, 1.0), (1.0, 0.0)].iter().enumerate() {
            for k in 0..3 {
                let j = 0.05 * k as f64;
                x.push(vec![a + j, b - j]);
                y.push(u8::from(i >= 2));
            }
        }
        let p = SvmParams { c: 10.0, gamma: Some(1.0), ..Default::default() };
        let m = svm_train(&x, &y, &p).unwrap();
        assert_eq!(accuracy(&m, &x, &y), 1.0);
    }

    #[test]
    fn kkt_holds_independently() {
        let mut rng = Rng::new(9);
        let n = 30;
        let x: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.normal(), rng.normal()]).collect();
        let y: Vec<f64> = x.iter().map(|v| if v[0] * v[1] > 0.0 { 1.0 } else { -1.0 }).collect();
        let mut k = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                k[i * n + j] = rbf(&x[i], &x[j], 0.5);
            }
        }
        let c = 5.0;
        let sol = smo(&k, &y, c, 1e-3, 100_000);
        let grad: Vec<f64> = (0..n)
            .map(|i| (0..n).map(|j| y[i] * y[j] * k[i * n + j] * sol.alpha[j]).sum::<f64>() - 1.0)
            .collect();
        let (gap, _, _) = kkt_gap(&sol.alpha, &y, &grad, c);
        assert!(gap < 1e-3 + 1e-9, "{gap}");
        let balance: f64 = sol.alpha.iter().zip(&y).map(|(a, b)| a * b).sum();
        assert!(balance.abs() < 1e-9);
    }

    #[test]
    fn degenerate_sets_rejected() {
        let x = vec![vec![0.0], vec![1.0]];
        assert!(matches!(svm_train(&x, &[3, 3], &SvmParams::default()), Err(Error::DegenerateTrainingSet(_))));
        assert!(matches!(svm_train(&x, &[3, 4], &SvmParams::default()), Err(Error::DegenerateTrainingSet(_))));
    }

    #[test]
    fn tie_goes_to_lowest_class() {
        let mut votes = vec![0u32; 12];
        votes[3] = 4;
        votes[7] = 4;
        assert_eq!(vote_winner(&votes), 3);
    }

    #[test]
    fn standardize_then_predict_matches() {
        let mut rng = Rng::new(2);
        let (x, y) = blobs(&mut rng);
        let m = svm_train(&x, &y, &SvmParams::default()).unwrap();
        for f in &x {
            assert_eq!(m.predict(f), m.predict_standardized(&m.standardize(f)));
        }
        let back = SvmModel::from_container(&Container::from_bytes(&m.to_container().to_bytes().unwrap()).unwrap()).unwrap();
        assert_eq!(back, m);
    }
}
