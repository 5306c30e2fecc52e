use physiogait_core::Rng;

use super::config::{EncoderConfig, EncoderKind, ExperimentConfig, SeqNorm};
use super::input::{ModalityInput, Sample, IMAGE_SHAPE};
use super::pairs::TrainingPair;
use crate::autodiff::gradcheck::Objective;
use crate::autodiff::layers::kaiming_uniform;
use crate::autodiff::loss::{contrastive, cross_entropy, softmax};
use crate::autodiff::{Adam, Ctx, Mode, Param, Scalar, Sequential, Tensor};
use crate::error::{Error, Result};

/// One modality branch. Both Siamese branches run through the same instance.
#[derive(Clone, Debug)]
pub struct Encoder<T> {
    pub config: EncoderConfig,
    pub net: Sequential<T>,
    /// Per-feature `(mean, std)` applied to sequence inputs under
    /// [`SeqNorm::Global`]; set from the training windows.
    pub norm: Option<(Vec<f64>, Vec<f64>)>,
}

/// Multi-modal Siamese network: per-modality encoders whose outputs are
/// concatenated into the common embedding, followed by a bias-free softmax
/// identification head.
#[derive(Clone, Debug)]
pub struct Mmsnn<T> {
    config: ExperimentConfig,
    n_classes: usize,
    encoders: Vec<Encoder<T>>,
    /// `[n_classes, embedding]`
    pub head: Param<T>,
}

/// Samples per inference batch.
const INFER_CHUNK: usize = 32;

impl<T: Scalar> Mmsnn<T> {
    pub fn new(config: ExperimentConfig, n_classes: usize, rng: &mut Rng) -> Result<Self> {
        config.validate()?;
        if n_classes < 2 {
            return Err(Error::InvalidConfig(format!("need at least 2 classes, got {n_classes}")));
        }
        let mut encoders = Vec::with_capacity(config.encoders.len());
        for enc in &config.encoders {
            let shape = match enc.kind {
                EncoderKind::Cnn => IMAGE_SHAPE.to_vec(),
                EncoderKind::Lstm => vec![config.seq_len, enc.modality.features()],
            };
            let net = Sequential::new(&config.encoder_layers(enc.kind), &shape, rng)?;
            encoders.push(Encoder { config: *enc, net, norm: None });
        }
        let d = config.embed_dim() * encoders.len();
        let head = Param::new("head", vec![n_classes, d], kaiming_uniform(n_classes * d, d, rng));
        Ok(Self { config, n_classes, encoders, head })
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.config
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn encoders(&self) -> &[Encoder<T>] {
        &self.encoders
    }

    pub fn encoders_mut(&mut self) -> &mut [Encoder<T>] {
        &mut self.encoders
    }

    pub fn embed_dim(&self) -> usize {
        self.config.embed_dim() * self.encoders.len()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param<T>> {
        let mut v: Vec<&mut Param<T>> = self.encoders.iter_mut().flat_map(|e| e.net.params_mut()).collect();
        v.push(&mut self.head);
        v
    }

    pub fn n_params(&self) -> usize {
        self.encoders.iter().map(|e| e.net.n_params()).sum::<usize>() + self.head.len()
    }

    fn check_sample(&self, s: &Sample) -> Result<()> {
        if s.inputs.len() != self.encoders.len() {
            return Err(Error::ModalityMismatch(format!("{} inputs for {} encoders", s.inputs.len(), self.encoders.len())));
        }
        for (inp, enc) in s.inputs.iter().zip(&self.encoders) {
            if !inp.matches(&enc.config, self.config.seq_len) {
                return Err(Error::ModalityMismatch(format!("input does not fit encoder {}", enc.config)));
            }
        }
        Ok(())
    }

    /// Set the global sequence statistics from `samples` (no-op for images or
    /// per-window normalization).
    pub fn fit_normalization(&mut self, samples: &[Sample]) -> Result<()> {
        for s in samples {
            self.check_sample(s)?;
        }
        if self.config.seq_norm != SeqNorm::Global {
            return Ok(());
        }
        for (e, enc) in self.encoders.iter_mut().enumerate() {
            if enc.config.kind != EncoderKind::Lstm {
                continue;
            }
            let f = enc.config.modality.features();
            let mut sum = vec![0.0; f];
            let mut sq = vec![0.0; f];
            let mut count = 0usize;
            for s in samples {
                if let ModalityInput::Sequence { data, .. } = &s.inputs[e] {
                    for (i, &v) in data.iter().enumerate() {
                        sum[i % f] += f64::from(v);
                        sq[i % f] += f64::from(v) * f64::from(v);
                    }
                    count += data.len() / f;
                }
            }
            let n = count.max(1) as f64;
            let mean: Vec<f64> = sum.iter().map(|s| s / n).collect();
            let std = sq.iter().zip(&mean).map(|(q, m)| (q / n - m * m).max(0.0).sqrt()).map(|s| if s > 1e-12 { s } else { 1.0 }).collect();
            enc.norm = Some((mean, std));
        }
        Ok(())
    }

    /// Stack encoder `e`'s inputs of `samples` into one batch tensor.
    fn batch_input(&self, e: usize, samples: &[&Sample]) -> Result<Tensor<T>> {
        let enc = &self.encoders[e];
        let mut shape = vec![samples.len()];
        shape.extend_from_slice(enc.net.input_shape());
        let mut data = Vec::with_capacity(shape.iter().product());
        for s in samples {
            match &s.inputs[e] {
                ModalityInput::Image(px) => data.extend(px.iter().map(|&v| T::of(f64::from(v)))),
                ModalityInput::Sequence { features, data: seq } => match &enc.norm {
                    Some((mean, std)) => data.extend(
                        seq.iter().enumerate().map(|(i, &v)| T::of((f64::from(v) - mean[i % features]) / std[i % features])),
                    ),
                    None => data.extend(seq.iter().map(|&v| T::of(f64::from(v)))),
                },
            }
        }
        Tensor::new(shape, data)
    }

    /// Logits `W eta`.
    fn logits(&self, eta: &[f64]) -> Vec<f64> {
        let d = eta.len();
        (0..self.n_classes)
            .map(|c| self.head.value[c * d..(c + 1) * d].iter().zip(eta).map(|(w, x)| w.to_f64_lossy() * x).sum())
            .collect()
    }

    /// Class probabilities for one embedding.
    pub fn identify(&self, eta: &[f64]) -> Vec<f64> {
        softmax(&self.logits(eta))
    }

    /// Eval-mode embeddings `[N, D]` (dropout off, running batch statistics).
    pub fn embed(&self, samples: &[&Sample]) -> Result<Vec<Vec<f64>>> {
        let mut out = Vec::with_capacity(samples.len());
        for chunk in samples.chunks(INFER_CHUNK) {
            for s in chunk {
                self.check_sample(s)?;
            }
            let parts = (0..self.encoders.len())
                .map(|e| self.encoders[e].net.infer(&self.batch_input(e, chunk)?))
                .collect::<Result<Vec<_>>>()?;
            let eta = Tensor::concat_columns(&parts)?;
            for i in 0..chunk.len() {
                out.push(eta.sample(i).iter().map(|v| v.to_f64_lossy()).collect());
            }
        }
        Ok(out)
    }

    /// Most probable identity and the full distribution.
    pub fn predict_identity(&self, sample: &Sample) -> Result<(usize, Vec<f64>)> {
        Ok(self.predict_batch(&[sample])?.remove(0))
    }

    pub fn predict_batch(&self, samples: &[&Sample]) -> Result<Vec<(usize, Vec<f64>)>> {
        Ok(self
            .embed(samples)?
            .iter()
            .map(|eta| {
                let p = self.identify(eta);
                let best = p.iter().enumerate().fold(0, |b, (i, &v)| if v > p[b] { i } else { b });
                (best, p)
            })
            .collect())
    }

    /// Mean joint loss over `pairs` in train mode. With `grad`, gradients are
    /// zeroed and then accumulated for every parameter.
    pub fn batch_loss(&mut self, samples: &[Sample], pairs: &[TrainingPair], rng: &mut Rng, grad: bool) -> Result<f64> {
        let b = pairs.len();
        if b == 0 {
            return Err(Error::InsufficientWindows("empty batch".into()));
        }
        let mut branch: Vec<&Sample> = Vec::with_capacity(2 * b);
        for p in pairs {
            let get = |i: usize| samples.get(i).ok_or_else(|| Error::InsufficientWindows(format!("pair refers to window {i}")));
            branch.push(get(p.left)?);
        }
        for p in pairs {
            branch.push(&samples[p.right]);
        }
        for s in &branch {
            self.check_sample(s)?;
        }
        let mut outputs = Vec::with_capacity(self.encoders.len());
        let mut tapes = Vec::with_capacity(self.encoders.len());
        for e in 0..self.encoders.len() {
            let x = self.batch_input(e, &branch)?;
            let mut ctx = Ctx { mode: Mode::Train, rng: &mut *rng, tie_halves: true };
            let (y, tape) = self.encoders[e].net.forward(&x, &mut ctx)?;
            outputs.push(y);
            tapes.push(tape);
        }
        let eta = Tensor::concat_columns(&outputs)?;
        let d = self.embed_dim();
        let row = |i: usize| -> Vec<f64> { eta.sample(i).iter().map(|v| v.to_f64_lossy()).collect() };
        let (lc_w, id_w) = (self.config.lambda_c, self.config.lambda_id);
        let scale = 1.0 / b as f64;
        let mut total = 0.0;
        let mut d_eta = vec![0.0; 2 * b * d];
        let mut d_head = vec![0.0; self.head.len()];
        for (i, p) in pairs.iter().enumerate() {
            let (a, r) = (row(i), row(b + i));
            let (lc, ga) = contrastive(&a, &r, p.similar, self.config.margin);
            let (ce_a, dz_a) = cross_entropy(&self.logits(&a), p.left_identity);
            let (ce_b, dz_b) = cross_entropy(&self.logits(&r), p.right_identity);
            total += lc_w * lc + id_w * 0.5 * (ce_a + ce_b);
            if !grad {
                continue;
            }
            for (side, x, dz, sign) in [(i, &a, &dz_a, 1.0), (b + i, &r, &dz_b, -1.0)] {
                let out = &mut d_eta[side * d..(side + 1) * d];
                for k in 0..d {
                    out[k] += scale * lc_w * sign * ga[k];
                }
                for (c, &g) in dz.iter().enumerate() {
                    let w = &self.head.value[c * d..(c + 1) * d];
                    let gw = &mut d_head[c * d..(c + 1) * d];
                    let g = scale * id_w * 0.5 * g;
                    for k in 0..d {
                        out[k] += g * w[k].to_f64_lossy();
                        gw[k] += g * x[k];
                    }
                }
            }
        }
        if grad {
            self.head.zero_grad();
            self.head.grad.iter_mut().zip(&d_head).for_each(|(g, &v)| *g = T::of(v));
            let dy = Tensor::from_f64(vec![2 * b, d], &d_eta)?;
            let widths = vec![self.config.embed_dim(); self.encoders.len()];
            for ((enc, tape), g) in self.encoders.iter_mut().zip(tapes).zip(dy.split_columns(&widths)?) {
                enc.net.zero_grad();
                enc.net.backward(tape, &g, false)?;
            }
        }
        Ok(total * scale)
    }

    /// Minibatch Adam over shuffled pairs for `config.epochs` epochs. Global
    /// sequence statistics are fitted first if not yet set. Returns the mean
    /// loss of every epoch.
    pub fn train(&mut self, samples: &[Sample], pairs: &[TrainingPair], rng: &mut Rng) -> Result<Vec<f64>> {
        if pairs.is_empty() {
            return Err(Error::InsufficientWindows("no training pairs".into()));
        }
        if self.encoders.iter().any(|e| e.config.kind == EncoderKind::Lstm && e.norm.is_none()) {
            self.fit_normalization(samples)?;
        }
        let mut adam = Adam::new(self.config.lr);
        let mut order: Vec<usize> = (0..pairs.len()).collect();
        let mut curve = Vec::with_capacity(self.config.epochs);
        for epoch in 0..self.config.epochs {
            rng.shuffle(&mut order);
            let mut sum = 0.0;
            for (batch, idx) in order.chunks(self.config.batch).enumerate() {
                let chosen: Vec<TrainingPair> = idx.iter().map(|&i| pairs[i]).collect();
                let loss = self.batch_loss(samples, &chosen, rng, true)?;
                if !loss.is_finite() {
                    return Err(Error::NonFiniteLoss { epoch, batch });
                }
                adam.step(&mut self.params_mut())?;
                sum += loss * idx.len() as f64;
            }
            let mean = sum / pairs.len() as f64;
            log::info!("{} epoch {}/{}: loss {mean:.6}", self.config.name, epoch + 1, self.config.epochs);
            curve.push(mean);
        }
        Ok(curve)
    }
}

/// Joint loss of a fixed pair batch as a function of every network parameter,
/// for finite-difference checks. Dropout masks are reseeded on each call.
pub struct PairObjective<'a> {
    pub model: Mmsnn<f64>,
    pub samples: &'a [Sample],
    pub pairs: Vec<TrainingPair>,
    pub dropout_seed: u64,
}

impl Objective for PairObjective<'_> {
    fn evaluate(&mut self, grad: bool) -> Result<f64> {
        let mut rng = Rng::new(self.dropout_seed);
        self.model.batch_loss(self.samples, &self.pairs, &mut rng, grad)
    }

    fn params_mut(&mut self) -> Vec<&mut Param<f64>> {
        self.model.params_mut()
    }
}
