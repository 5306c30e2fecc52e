//! Skin-conductance decomposition into tonic and phasic parts.
//!
//! The observed conductance is modelled as `y = y_p + y_s + noise`. The phasic
//! part is a sparse nonnegative driver `u` filtered by the Bateman impulse
//! response `h(t) = (exp(-t/tau_decay) - exp(-t/tau_rise)) / (tau_decay - tau_rise)`,
//! which is the impulse response of
//! `tau_decay*tau_rise*y'' + (tau_decay + tau_rise)*y' + y = u`. The tonic part is a
//! cubic B-spline with a second-difference roughness penalty.
//!
//! [`decompose`] minimises
//! `|y - A u - B l|^2 + lambda_sparse * sum(u) + lambda_tonic * |D2 l|^2`, `u >= 0`
//! by block coordinate descent: cyclic exact coordinate minimisation for `u`
//! and a closed-form penalised least-squares solve for `l`. Both weights are
//! picked by generalized cross-validation during a short calibration phase and
//! then frozen, after which every block update is monotone in the objective.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats;
use crate::stream::{Channel, SensorStream};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatemanParams {
    pub tau_rise_s: f64,
    pub tau_decay_s: f64,
}

impl Default for BatemanParams {
    fn default() -> Self {
        Self { tau_rise_s: 0.7, tau_decay_s: 2.0 }
    }
}

impl BatemanParams {
    pub fn new(tau_rise_s: f64, tau_decay_s: f64) -> Result<Self> {
        let p = Self { tau_rise_s, tau_decay_s };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau_rise_s > 0.0 && self.tau_decay_s > self.tau_rise_s && self.tau_decay_s.is_finite()) {
            return Err(Error::InvalidTaus { tau_rise: self.tau_rise_s, tau_decay: self.tau_decay_s });
        }
        Ok(())
    }

    /// `h(t)` for `t >= 0`, zero before.
    pub fn response(&self, t: f64) -> f64 {
        if t < 0.0 {
            return 0.0;
        }
        ((-t / self.tau_decay_s).exp() - (-t / self.tau_rise_s).exp()) / (self.tau_decay_s - self.tau_rise_s)
    }
}

/// Sampled Bateman response `h[k] = h(k / rate_hz)` for `k / rate_hz <= duration_s`.
pub fn bateman_kernel(params: &BatemanParams, rate_hz: f64, duration_s: f64) -> Result<Vec<f64>> {
    params.validate()?;
    if !(rate_hz > 0.0 && duration_s >= 0.0) {
        return Err(Error::InvalidParameter("rate must be positive and duration nonnegative".into()));
    }
    if duration_s < 5.0 * params.tau_decay_s {
        log::warn!("Bateman kernel truncated at {duration_s} s, under 5 decay constants");
    }
    let n = (duration_s * rate_hz + 1e-9).floor() as usize + 1;
    Ok((0..n).map(|k| params.response(k as f64 / rate_hz)).collect())
}

/// Kernel long enough that the dropped tail is below `1e-12` of the peak.
fn working_kernel(params: &BatemanParams, rate_hz: f64, max_len: usize) -> Vec<f64> {
    let tail_s = params.tau_decay_s * (1e12f64).ln();
    let n = ((tail_s * rate_hz).ceil() as usize + 1).min(max_len.max(1));
    (0..n).map(|k| params.response(k as f64 / rate_hz)).collect()
}

/// `y_p[k] = y_p0 * exp(-t_k / tau_decay) + dt * sum_j h[k - j] u[j]`.
pub fn phasic_from_driver(u: &[f64], params: &BatemanParams, rate_hz: f64, y_p0: f64) -> Result<Vec<f64>> {
    params.validate()?;
    if let Some(i) = u.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFiniteSample(i));
    }
    let dt = 1.0 / rate_hz;
    let h = working_kernel(params, rate_hz, u.len());
    let mut y: Vec<f64> = (0..u.len()).map(|k| y_p0 * (-(k as f64) * dt / params.tau_decay_s).exp()).collect();
    convolve_add(&h, u, dt, &mut y);
    Ok(y)
}

/// `out[j + k] += scale * h[k] * u[j]` (causal convolution, truncated to `out.len()`).
fn convolve_add(h: &[f64], u: &[f64], scale: f64, out: &mut [f64]) {
    let n = out.len();
    for (j, &uj) in u.iter().enumerate() {
        if uj == 0.0 {
            continue;
        }
        let w = scale * uj;
        for (k, &hk) in h.iter().enumerate().take(n - j) {
            out[j + k] += w * hk;
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecomposeOptions {
    pub max_iter: usize,
    /// Stop once the relative objective change of a full iteration drops below this.
    pub tol: f64,
    pub knot_spacing_s: f64,
    pub lambda_tonic_grid: Vec<f64>,
    pub lambda_sparse_grid: Vec<f64>,
    /// Iterations during which the weights are re-selected by GCV.
    pub calibration_iters: usize,
    /// Coordinate-descent sweeps per driver block.
    pub driver_sweeps: usize,
    /// Window of the moving median used as the initial tonic estimate.
    pub init_median_s: f64,
    /// Grid-search the Bateman constants over {0.5,0.7,1.0} x {2,4,6} s.
    pub refine_taus: bool,
}

fn log_grid(lo_exp: f64, hi_exp: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 10f64.powf(lo_exp + (hi_exp - lo_exp) * i as f64 / (n - 1) as f64))
        .collect()
}

impl Default for DecomposeOptions {
    fn default() -> Self {
        Self {
            max_iter: 50,
            tol: 1e-6,
            knot_spacing_s: 10.0,
            lambda_tonic_grid: log_grid(-2.0, 2.0, 9),
            lambda_sparse_grid: log_grid(-3.0, 0.0, 7),
            calibration_iters: 2,
            driver_sweeps: 10,
            init_median_s: 30.0,
            refine_taus: false,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ScDecomposition {
    pub y: SensorStream,
    pub tonic: SensorStream,
    pub phasic: SensorStream,
    pub driver: SensorStream,
    pub params: BatemanParams,
    pub residual: Vec<f64>,
    pub lambda_tonic: f64,
    pub lambda_sparse: f64,
    /// Objective after every block update once the weights are frozen.
    pub objective_trace: Vec<f64>,
    pub iterations: usize,
    /// False when `max_iter` was reached first; the best iterate is still returned.
    pub converged: bool,
}

impl ScDecomposition {
    /// Coefficient of determination of `tonic + phasic` against the input.
    pub fn r_squared(&self) -> f64 {
        let y = self.y.values();
        let m = stats::mean(y);
        let ss_tot: f64 = y.iter().map(|v| (v - m) * (v - m)).sum();
        let ss_res: f64 = self.residual.iter().map(|r| r * r).sum();
        if ss_tot == 0.0 {
            if ss_res == 0.0 { 1.0 } else { 0.0 }
        } else {
            1.0 - ss_res / ss_tot
        }
    }
}

/// Uniform cubic B-spline basis, stored row-wise as (first column, 4 weights).
struct SplineBasis {
    rows: Vec<(usize, [f64; 4])>,
    p: usize,
}

impl SplineBasis {
    fn new(n: usize, rate_hz: f64, knot_spacing_s: f64) -> Self {
        let total = (n.saturating_sub(1)) as f64 / rate_hz;
        let m = ((total / knot_spacing_s).ceil() as usize).max(1);
        let rows = (0..n)
            .map(|i| {
                let u = (i as f64 / rate_hz) / knot_spacing_s;
                let seg = (u.floor() as usize).min(m - 1);
                let t = u - seg as f64;
                let t2 = t * t;
                let t3 = t2 * t;
                let w = [
                    (1.0 - t).powi(3) / 6.0,
                    (3.0 * t3 - 6.0 * t2 + 4.0) / 6.0,
                    (-3.0 * t3 + 3.0 * t2 + 3.0 * t + 1.0) / 6.0,
                    t3 / 6.0,
                ];
                (seg, w)
            })
            .collect();
        Self { rows, p: m + 3 }
    }

    fn gram(&self) -> DMatrix<f64> {
        let mut g = DMatrix::zeros(self.p, self.p);
        for &(s, w) in &self.rows {
            for a in 0..4 {
                for b in 0..4 {
                    g[(s + a, s + b)] += w[a] * w[b];
                }
            }
        }
        g
    }

    fn t_mul(&self, r: &[f64]) -> DVector<f64> {
        let mut out = DVector::zeros(self.p);
        for (&(s, w), &ri) in self.rows.iter().zip(r) {
            for a in 0..4 {
                out[s + a] += w[a] * ri;
            }
        }
        out
    }

    fn mul(&self, coef: &DVector<f64>) -> Vec<f64> {
        self.rows.iter().map(|&(s, w)| (0..4).map(|a| w[a] * coef[s + a]).sum()).collect()
    }
}

fn second_difference_gram(p: usize) -> DMatrix<f64> {
    let mut g = DMatrix::zeros(p, p);
    let d = [1.0, -2.0, 1.0];
    for r in 0..p.saturating_sub(2) {
        for a in 0..3 {
            for b in 0..3 {
                g[(r + a, r + b)] += d[a] * d[b];
            }
        }
    }
    g
}

struct TonicFit {
    fitted: Vec<f64>,
    trace_hat: f64,
    penalty: f64,
}

struct Problem<'a> {
    y: &'a [f64],
    dt: f64,
    h: Vec<f64>,
    col_norm2: Vec<f64>,
    basis: SplineBasis,
    gram: DMatrix<f64>,
    dtd: DMatrix<f64>,
}

impl<'a> Problem<'a> {
    fn new(y: &'a [f64], rate_hz: f64, params: &BatemanParams, knot_spacing_s: f64) -> Self {
        let n = y.len();
        let dt = 1.0 / rate_hz;
        let h = working_kernel(params, rate_hz, n);
        let col_norm2 = (0..n)
            .map(|j| h.iter().take(n - j).map(|v| (dt * v) * (dt * v)).sum())
            .collect();
        let basis = SplineBasis::new(n, rate_hz, knot_spacing_s);
        let gram = basis.gram();
        let dtd = second_difference_gram(basis.p);
        Self { y, dt, h, col_norm2, basis, gram, dtd }
    }

    fn phasic(&self, u: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; u.len()];
        convolve_add(&self.h, u, self.dt, &mut out);
        out
    }

    /// Exact cyclic coordinate descent on `u >= 0`; `r = y - A u - tonic` is kept current.
    fn driver_block(&self, u: &mut [f64], r: &mut [f64], lambda: f64, sweeps: usize) {
        let n = u.len();
        for _ in 0..sweeps {
            let mut max_delta = 0.0f64;
            for j in 0..n {
                let norm2 = self.col_norm2[j];
                if norm2 <= 0.0 {
                    continue;
                }
                let taps = self.h.len().min(n - j);
                let mut g = 0.0;
                for k in 0..taps {
                    g += self.dt * self.h[k] * r[j + k];
                }
                let new = (u[j] + (g - 0.5 * lambda) / norm2).max(0.0);
                let delta = new - u[j];
                if delta != 0.0 {
                    for k in 0..taps {
                        r[j + k] -= delta * self.dt * self.h[k];
                    }
                    u[j] = new;
                    max_delta = max_delta.max(delta.abs() * norm2.sqrt());
                }
            }
            if max_delta < 1e-12 {
                break;
            }
        }
    }

    fn tonic_fit(&self, target: &[f64], lambda: f64) -> TonicFit {
        let lhs = &self.gram + &self.dtd * lambda;
        let chol = lhs.cholesky().expect("penalised spline normal matrix is positive definite");
        let coef = chol.solve(&self.basis.t_mul(target));
        let fitted = self.basis.mul(&coef);
        let trace_hat = chol.solve(&self.gram).trace();
        let d2 = &self.dtd * &coef;
        let penalty = coef.dot(&d2);
        TonicFit { fitted, trace_hat, penalty }
    }

    /// Tonic block with the weight chosen by GCV on `target = y - A u`.
    fn tonic_gcv(&self, target: &[f64], grid: &[f64]) -> (f64, TonicFit) {
        let n = target.len() as f64;
        let mut best: Option<(f64, f64, TonicFit)> = None;
        for &lam in grid {
            let fit = self.tonic_fit(target, lam);
            let rss: f64 = target.iter().zip(&fit.fitted).map(|(a, b)| (a - b) * (a - b)).sum();
            let score = n * rss / (n - fit.trace_hat).powi(2);
            if best.as_ref().is_none_or(|b| score < b.0) {
                best = Some((score, lam, fit));
            }
        }
        let (_, lam, fit) = best.expect("non-empty grid");
        (lam, fit)
    }

    fn residual(&self, u: &[f64], tonic: &[f64]) -> Vec<f64> {
        let p = self.phasic(u);
        self.y.iter().zip(&p).zip(tonic).map(|((y, p), s)| y - p - s).collect()
    }

    fn objective(&self, u: &[f64], tonic: &[f64], lambda_sparse: f64, lambda_tonic: f64, penalty: f64) -> f64 {
        let r = self.residual(u, tonic);
        r.iter().map(|v| v * v).sum::<f64>() + lambda_sparse * u.iter().sum::<f64>() + lambda_tonic * penalty
    }
}

struct Iterate {
    u: Vec<f64>,
    fit: TonicFit,
    lambda_tonic: f64,
}

fn run_decompose(y: &SensorStream, params: &BatemanParams, opts: &DecomposeOptions) -> Result<ScDecomposition> {
    let rate = y.sample_rate_hz();
    let yv = y.values();
    let n = yv.len();
    let prob = Problem::new(yv, rate, params, opts.knot_spacing_s);

    let median_w = ((opts.init_median_s * rate).round() as usize).max(1);
    let mut tonic = stats::moving_median(yv, median_w);
    let mut u = vec![0.0; n];

    // Calibration: re-select both weights by GCV on the full fit.
    let mut lambda_sparse = opts.lambda_sparse_grid[0];
    let mut lambda_tonic = opts.lambda_tonic_grid[0];
    let mut current: Option<Iterate> = None;
    for _ in 0..opts.calibration_iters.max(1) {
        let mut best: Option<(f64, f64, Iterate)> = None;
        for &lam_u in &opts.lambda_sparse_grid {
            let mut cu = u.clone();
            let mut r: Vec<f64> = prob.residual(&cu, &tonic);
            prob.driver_block(&mut cu, &mut r, lam_u, opts.driver_sweeps);
            let p = prob.phasic(&cu);
            let target: Vec<f64> = yv.iter().zip(&p).map(|(a, b)| a - b).collect();
            let (lam_l, fit) = prob.tonic_gcv(&target, &opts.lambda_tonic_grid);
            let rss: f64 = target.iter().zip(&fit.fitted).map(|(a, b)| (a - b) * (a - b)).sum();
            let df = cu.iter().filter(|&&v| v > 0.0).count() as f64 + fit.trace_hat;
            let denom = (n as f64 - df).max(1.0);
            let score = n as f64 * rss / (denom * denom);
            if best.as_ref().is_none_or(|b| score < b.0) {
                best = Some((score, lam_u, Iterate { u: cu, fit, lambda_tonic: lam_l }));
            }
        }
        let (_, lam_u, it) = best.expect("non-empty grid");
        lambda_sparse = lam_u;
        lambda_tonic = it.lambda_tonic;
        u = it.u.clone();
        tonic = it.fit.fitted.clone();
        current = Some(it);
    }
    let mut fit = current.expect("at least one calibration pass").fit;

    // Frozen phase: monotone block coordinate descent.
    let mut trace = vec![prob.objective(&u, &fit.fitted, lambda_sparse, lambda_tonic, fit.penalty)];
    let mut converged = false;
    let mut iterations = 0;
    for _ in 0..opts.max_iter {
        iterations += 1;
        let before = *trace.last().unwrap();
        let mut r = prob.residual(&u, &fit.fitted);
        prob.driver_block(&mut u, &mut r, lambda_sparse, opts.driver_sweeps);
        trace.push(prob.objective(&u, &fit.fitted, lambda_sparse, lambda_tonic, fit.penalty));

        let p = prob.phasic(&u);
        let target: Vec<f64> = yv.iter().zip(&p).map(|(a, b)| a - b).collect();
        fit = prob.tonic_fit(&target, lambda_tonic);
        let after = prob.objective(&u, &fit.fitted, lambda_sparse, lambda_tonic, fit.penalty);
        trace.push(after);
        if (before - after).abs() <= opts.tol * before.abs().max(f64::MIN_POSITIVE) {
            converged = true;
            break;
        }
    }
    if !converged {
        log::warn!("EDA decomposition did not converge in {} iterations", opts.max_iter);
    }

    let phasic = prob.phasic(&u);
    let tonic_v = fit.fitted;
    let residual: Vec<f64> = yv.iter().zip(&phasic).zip(&tonic_v).map(|((y, p), s)| y - p - s).collect();
    let mk = |ch: Channel, v: Vec<f64>| SensorStream::new(ch, v, rate, y.start_time_s());
    Ok(ScDecomposition {
        y: y.clone(),
        tonic: mk(Channel::Tonic, tonic_v)?,
        phasic: mk(Channel::Phasic, phasic)?,
        driver: mk(Channel::Eda, u)?,
        params: *params,
        residual,
        lambda_tonic,
        lambda_sparse,
        objective_trace: trace,
        iterations,
        converged,
    })
}

/// Decompose a skin-conductance stream (microsiemens, at least 2 Hz and 30 s).
pub fn decompose(y: &SensorStream, params: &BatemanParams, opts: &DecomposeOptions) -> Result<ScDecomposition> {
    params.validate()?;
    if y.sample_rate_hz() < 2.0 {
        return Err(Error::InvalidParameter(format!("sample rate {} Hz below 2 Hz", y.sample_rate_hz())));
    }
    let needed = (30.0 * y.sample_rate_hz()).ceil() as usize;
    if y.len() < needed {
        return Err(Error::SignalTooShort { needed, got: y.len() });
    }
    if let Some(i) = y.values().iter().position(|&v| v < 0.0) {
        return Err(Error::NegativeInput(i));
    }
    if opts.lambda_sparse_grid.is_empty() || opts.lambda_tonic_grid.is_empty() {
        return Err(Error::InvalidParameter("regularization grids must be non-empty".into()));
    }
    if !opts.refine_taus {
        return run_decompose(y, params, opts);
    }
    let mut best: Option<ScDecomposition> = None;
    for rise in [0.5, 0.7, 1.0] {
        for decay in [2.0, 4.0, 6.0] {
            let cand = run_decompose(y, &BatemanParams::new(rise, decay)?, opts)?;
            let obj = *cand.objective_trace.last().unwrap();
            if best.as_ref().is_none_or(|b| obj < *b.objective_trace.last().unwrap()) {
                best = Some(cand);
            }
        }
    }
    Ok(best.expect("non-empty tau grid"))
}

/// Fraction of true driver impulses for which the recovered driver carries at
/// least `mass_fraction` of the true impulse mass within `±tolerance` samples.
pub fn spike_recall(true_driver: &[f64], recovered: &[f64], tolerance: usize, mass_fraction: f64) -> (usize, usize) {
    let mut hits = 0;
    let mut total = 0;
    for (k, &t) in true_driver.iter().enumerate() {
        if t <= 0.0 {
            continue;
        }
        total += 1;
        let lo = k.saturating_sub(tolerance);
        let hi = (k + tolerance + 1).min(recovered.len());
        let mass: f64 = recovered[lo..hi].iter().sum();
        if mass >= mass_fraction * t {
            hits += 1;
        }
    }
    (hits, total)
}
