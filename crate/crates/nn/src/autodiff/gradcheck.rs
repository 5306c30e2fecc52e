//! Central finite-difference gradient checking.

use physiogait_core::Rng;

use super::{Ctx, Mode, Param, Sequential, Tensor};
use crate::error::Result;

/// A differentiable scalar function of its parameters.
pub trait Objective {
    /// Loss at the current parameter values. With `grad`, parameter gradients
    /// are zeroed and then filled with the analytic gradient.
    fn evaluate(&mut self, grad: bool) -> Result<f64>;

    fn params_mut(&mut self) -> Vec<&mut Param<f64>>;
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradReport {
    pub max_rel_error: f64,
    /// Name and flat index of the worst entry.
    pub worst: (String, usize),
    pub checked: usize,
    /// Entries that needed the smaller retry step.
    pub refined: usize,
}

/// `|a - n| / max(|a| + |n|, 1e-6)`. The floor keeps gradients that vanish
/// analytically (a bias ahead of batch normalization) from being judged on
/// finite-difference round-off alone.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / (analytic.abs() + numeric.abs()).max(1e-6)
}

/// Compare analytic gradients with central differences of step `h`. At most
/// `max_per_tensor` entries of each parameter are probed (chosen by `rng`
/// when the tensor is larger).
///
/// Max pooling makes the loss piecewise smooth, and on large images a probe of
/// width `2h` can straddle an argmax switch. An entry whose error exceeds
/// `tol` is therefore probed once more with step `h / 10`; a genuine gradient
/// error fails at both steps, while a kink almost never recurs at the smaller
/// one. The smaller of the two errors is reported.
pub fn check_gradients<O: Objective>(obj: &mut O, h: f64, tol: f64, max_per_tensor: usize, rng: &mut Rng) -> Result<GradReport> {
    obj.evaluate(true)?;
    let picks: Vec<(String, Vec<usize>, Vec<f64>)> = obj
        .params_mut()
        .into_iter()
        .map(|p| {
            let mut idx: Vec<usize> = (0..p.len()).collect();
            if idx.len() > max_per_tensor {
                rng.shuffle(&mut idx);
                idx.truncate(max_per_tensor);
                idx.sort_unstable();
            }
            let analytic = idx.iter().map(|&i| p.grad[i]).collect();
            (p.name.to_string(), idx, analytic)
        })
        .collect();
    let mut report = GradReport { max_rel_error: 0.0, worst: (String::new(), 0), checked: 0, refined: 0 };
    for (t, (name, idx, analytic)) in picks.iter().enumerate() {
        for (&i, &a) in idx.iter().zip(analytic) {
            let mut central = |step: f64| -> Result<f64> {
                let orig = obj.params_mut()[t].value[i];
                obj.params_mut()[t].value[i] = orig + step;
                let up = obj.evaluate(false)?;
                obj.params_mut()[t].value[i] = orig - step;
                let down = obj.evaluate(false)?;
                obj.params_mut()[t].value[i] = orig;
                Ok((up - down) / (2.0 * step))
            };
            let mut err = relative_error(a, central(h)?);
            if err > tol {
                report.refined += 1;
                err = err.min(relative_error(a, central(h / 10.0)?));
            }
            report.checked += 1;
            if err > report.max_rel_error || report.checked == 1 {
                report.max_rel_error = err;
                report.worst = (format!("{t}:{name}"), i);
            }
        }
    }
    Ok(report)
}

/// `L = sum(r * net(x))` for a fixed random projection `r`, with the input
/// exposed as a parameter so its gradient is checked too. Every evaluation
/// reseeds the dropout generator, so masks are identical across probes.
pub struct SequentialObjective {
    pub net: Sequential<f64>,
    pub input: Param<f64>,
    pub projection: Vec<f64>,
    pub dropout_seed: u64,
    pub tie_halves: bool,
}

impl SequentialObjective {
    pub fn new(net: Sequential<f64>, batch: usize, rng: &mut Rng) -> Result<Self> {
        let mut in_shape = vec![batch];
        in_shape.extend_from_slice(net.input_shape());
        let n_in: usize = in_shape.iter().product();
        let input = Param::new("input", in_shape, (0..n_in).map(|_| rng.normal()).collect());
        let n_out = batch * net.output_shape().iter().product::<usize>();
        let projection = (0..n_out).map(|_| rng.normal()).collect();
        Ok(Self { net, input, projection, dropout_seed: rng.next_u64(), tie_halves: false })
    }
}

impl Objective for SequentialObjective {
    fn evaluate(&mut self, grad: bool) -> Result<f64> {
        let x = Tensor::new(self.input.shape.clone(), self.input.value.clone())?;
        let mut rng = Rng::new(self.dropout_seed);
        let mut ctx = Ctx { mode: Mode::Train, rng: &mut rng, tie_halves: self.tie_halves };
        let (y, tape) = self.net.forward(&x, &mut ctx)?;
        let loss = y.data().iter().zip(&self.projection).map(|(a, b)| a * b).sum();
        if grad {
            self.net.zero_grad();
            let dy = Tensor::new(y.shape().to_vec(), self.projection.clone())?;
            let dx = self.net.backward(tape, &dy, true)?.expect("input gradient requested");
            self.input.grad.copy_from_slice(dx.data());
        }
        Ok(loss)
    }

    fn params_mut(&mut self) -> Vec<&mut Param<f64>> {
        let mut v = self.net.params_mut();
        v.push(&mut self.input);
        v
    }
}
