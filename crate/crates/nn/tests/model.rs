use std::sync::Arc;
use std::time::Instant;

use physiogait_core::Rng;
use physiogait_nn::autodiff::gradcheck::check_gradients;
use physiogait_nn::autodiff::layers::Layer;
use physiogait_nn::mmsnn::{
    make_pairs, EncoderKind, ExperimentConfig, Mmsnn, ModalityInput, PairObjective, Sample, TrainingPair, IMAGE_SHAPE,
};
use physiogait_nn::{Mmsnn32, Mmsnn64};

fn random_input(kind: EncoderKind, features: usize, rng: &mut Rng) -> ModalityInput {
    match kind {
        EncoderKind::Cnn => {
            let n: usize = IMAGE_SHAPE.iter().product();
            ModalityInput::Image(Arc::new((0..n).map(|_| rng.normal() as f32).collect()))
        }
        EncoderKind::Lstm => {
            ModalityInput::Sequence { features, data: Arc::new((0..128 * features).map(|_| rng.normal() as f32).collect()) }
        }
    }
}

fn random_samples(cfg: &ExperimentConfig, n: usize, classes: usize, rng: &mut Rng) -> Vec<Sample> {
    (0..n)
        .map(|i| Sample {
            identity: i % classes,
            gesture: (i / classes % 2) as u8,
            inputs: cfg.encoders.iter().map(|e| random_input(e.kind, e.modality.features(), rng)).collect(),
        })
        .collect()
}

fn small(name: &str) -> ExperimentConfig {
    ExperimentConfig { width_divisor: 8, ..ExperimentConfig::preset(name).unwrap() }
}

#[test]
fn embedding_width_is_forty_per_encoder() {
    let mut rng = Rng::new(0);
    for (name, dim) in [("P1", 40), ("P3", 120), ("P4", 160)] {
        let cfg = ExperimentConfig::preset(name).unwrap();
        let samples = random_samples(&cfg, 2, 2, &mut rng);
        let model = Mmsnn32::new(cfg, 4, &mut rng).unwrap();
        assert_eq!(model.embed_dim(), dim);
        assert_eq!(model.head.shape, vec![4, dim]);
        let eta = model.embed(&[&samples[0]]).unwrap();
        assert_eq!(eta[0].len(), dim);
    }
}

#[test]
fn image_encoder_flattens_to_canonical_width() {
    let mut rng = Rng::new(0);
    let model = Mmsnn32::new(ExperimentConfig::preset("P1").unwrap(), 2, &mut rng).unwrap();
    let net = &model.encoders()[0].net;
    let flatten = net.specs().iter().position(|s| matches!(s, physiogait_nn::autodiff::LayerSpec::Flatten)).unwrap();
    let mut shape = net.input_shape().to_vec();
    for (i, layer) in net.layers().iter().enumerate().take(flatten) {
        shape = layer.output_shape(i, &shape).unwrap();
        if i == 0 {
            assert_eq!(shape, vec![8, 145, 210]);
        }
    }
    assert_eq!(shape, vec![32, 16, 24]);
    assert_eq!(shape.iter().product::<usize>(), 12288);
}

#[test]
fn zero_weights_collapse_to_final_bias() {
    let mut rng = Rng::new(1);
    let cfg = small("CNN:ACC+LSTM:HR");
    let samples = random_samples(&cfg, 3, 3, &mut rng);
    let mut model = Mmsnn64::new(cfg, 3, &mut rng).unwrap();
    let mut biases = Vec::new();
    for enc in model.encoders_mut() {
        let n = enc.net.layers().len();
        for (i, layer) in enc.net.layers_mut().iter_mut().enumerate() {
            let is_bn = matches!(layer, Layer::BatchNorm(_));
            for p in layer.params_mut() {
                // Batch normalization stays the identity (gamma 1, beta 0).
                if !is_bn {
                    p.value.iter_mut().for_each(|v| *v = 0.0);
                }
                if i == n - 1 && p.name == "bias" {
                    p.value.iter_mut().enumerate().for_each(|(k, v)| *v = 0.1 * (k as f64 + 1.0));
                    biases.extend(p.value.clone());
                }
            }
        }
    }
    let refs: Vec<&Sample> = samples.iter().collect();
    for eta in model.embed(&refs).unwrap() {
        assert_eq!(eta, biases);
    }
}

#[test]
fn identify_is_a_simplex_point_with_shift_invariant_argmax() {
    let mut rng = Rng::new(2);
    let mut model = Mmsnn64::new(small("LSTM:HR"), 2, &mut rng).unwrap();
    model.head.value.iter_mut().for_each(|v| *v = 0.0);
    let eta = vec![0.3; model.embed_dim()];
    assert!(model.identify(&eta).iter().all(|&p| (p - 0.5).abs() < 1e-15));

    let d = model.embed_dim();
    model.head.value[0] = 1.0;
    model.head.value[d + 1] = 1.0;
    let mut eta = vec![0.0; d];
    eta[0] = 3.0;
    eta[1] = 1.0;
    let p = model.identify(&eta);
    assert!((p[0] - 0.8808).abs() < 1e-4 && (p[1] - 0.1192).abs() < 1e-4);

    let eta: Vec<f64> = (0..d).map(|_| rng.normal()).collect();
    let before = model.identify(&eta);
    let shift: Vec<f64> = (0..d).map(|_| rng.normal()).collect();
    for c in 0..2 {
        for k in 0..d {
            model.head.value[c * d + k] += shift[k];
        }
    }
    let after = model.identify(&eta);
    assert!((after.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    let argmax = |p: &[f64]| if p[0] >= p[1] { 0 } else { 1 };
    assert_eq!(argmax(&before), argmax(&after));
}

#[test]
fn identical_branches_have_zero_contrastive_loss() {
    let mut rng = Rng::new(3);
    let cfg = ExperimentConfig { lambda_id: 0.0, ..small("CNN:ACC+LSTM:HR") };
    let samples = random_samples(&cfg, 4, 2, &mut rng);
    let mut model = Mmsnn64::new(cfg, 2, &mut rng).unwrap();
    model.fit_normalization(&samples).unwrap();
    let pairs = [TrainingPair { left: 0, right: 0, similar: true, left_identity: 0, right_identity: 0 }; 2];
    assert_eq!(model.batch_loss(&samples, &pairs, &mut rng, false).unwrap(), 0.0);
}

#[test]
fn swapping_branches_leaves_loss_unchanged() {
    let mut rng = Rng::new(4);
    let cfg = small("CNN:ACC+LSTM:HR");
    let samples = random_samples(&cfg, 6, 3, &mut rng);
    let mut model = Mmsnn64::new(cfg, 3, &mut rng).unwrap();
    model.fit_normalization(&samples).unwrap();
    let pairs = vec![
        TrainingPair { left: 0, right: 3, similar: true, left_identity: 0, right_identity: 0 },
        TrainingPair { left: 1, right: 5, similar: false, left_identity: 1, right_identity: 2 },
    ];
    let swapped: Vec<TrainingPair> = pairs
        .iter()
        .map(|p| TrainingPair { left: p.right, right: p.left, similar: p.similar, left_identity: p.right_identity, right_identity: p.left_identity })
        .collect();
    let a = model.batch_loss(&samples, &pairs, &mut Rng::new(9), false).unwrap();
    let b = model.batch_loss(&samples, &swapped, &mut Rng::new(9), false).unwrap();
    assert!((a - b).abs() <= 1e-12 * a.abs(), "{a} vs {b}");
}

#[test]
fn composite_gradient_check_width_reduced() {
    let start = Instant::now();
    let mut rng = Rng::new(5);
    let cfg = small("P4");
    let samples = random_samples(&cfg, 4, 3, &mut rng);
    let mut model = Mmsnn64::new(cfg, 3, &mut rng).unwrap();
    model.fit_normalization(&samples).unwrap();
    let pairs = vec![
        TrainingPair { left: 0, right: 3, similar: true, left_identity: 0, right_identity: 0 },
        TrainingPair { left: 1, right: 2, similar: false, left_identity: 1, right_identity: 2 },
    ];
    let mut obj = PairObjective { model, samples: &samples, pairs, dropout_seed: 77 };
    let report = check_gradients(&mut obj, 1e-4, 1e-3, 6, &mut rng).unwrap();
    assert!(report.max_rel_error < 1e-3, "{report:?}");
    eprintln!("composite check: {report:?} in {:?}", start.elapsed());
}

#[test]
fn prediction_ignores_training_randomness_and_sums_to_one() {
    let mut rng = Rng::new(6);
    let cfg = small("CNN:ACC+LSTM:HR");
    let samples = random_samples(&cfg, 4, 2, &mut rng);
    let model = Mmsnn32::new(cfg, 2, &mut rng).unwrap();
    let (c1, p1) = model.predict_identity(&samples[1]).unwrap();
    let (c2, p2) = model.predict_identity(&samples[1]).unwrap();
    assert_eq!((c1, &p1), (c2, &p2));
    assert!((p1.iter().sum::<f64>() - 1.0).abs() < 1e-6);
}

#[test]
fn mismatched_inputs_are_rejected() {
    let mut rng = Rng::new(7);
    let cfg = small("CNN:ACC+LSTM:HR");
    let model = Mmsnn32::new(cfg, 2, &mut rng).unwrap();
    let wrong = Sample { identity: 0, gesture: 0, inputs: vec![random_input(EncoderKind::Lstm, 1, &mut rng)] };
    assert!(model.predict_identity(&wrong).is_err());
    let swapped = Sample {
        identity: 0,
        gesture: 0,
        inputs: vec![random_input(EncoderKind::Lstm, 1, &mut rng), random_input(EncoderKind::Cnn, 3, &mut rng)],
    };
    assert!(model.predict_identity(&swapped).is_err());
}

/// Sequences whose level identifies the wearer: wearer 0 sits at 90 BPM, the
/// others between 60 and 70.
fn hr_cohort(rng: &mut Rng, per: usize) -> Vec<Sample> {
    let levels = [90.0, 60.0, 63.0, 66.0, 69.0];
    let mut out = Vec::new();
    for (id, &level) in levels.iter().enumerate() {
        for k in 0..per {
            let phase = rng.uniform() * 6.0;
            let hr: Vec<f64> = (0..40).map(|t| level + 1.5 * (phase + t as f64 * 0.2).sin() + 0.3 * rng.normal()).collect();
            let input = ModalityInput::sequence(&[&hr], 128, physiogait_nn::mmsnn::SeqNorm::Global).unwrap();
            out.push(Sample { identity: id, gesture: (k % 2) as u8, inputs: vec![input] });
        }
    }
    out
}

#[test]
fn training_descends_and_recognizes_extreme_heart_rate() {
    let mut rng = Rng::new(8);
    let train = hr_cohort(&mut rng, 12);
    let test = hr_cohort(&mut rng, 4);
    let cfg = ExperimentConfig { epochs: 20, episodes: 160, ..ExperimentConfig::preset("LSTM:HR").unwrap() };
    let keys: Vec<(usize, u8)> = train.iter().map(|s| (s.identity, s.gesture)).collect();
    let pairs = make_pairs(&keys, cfg.episodes, cfg.ratio_similar, &mut rng).unwrap();
    let mut model = Mmsnn32::new(cfg, 5, &mut rng).unwrap();
    let curve = model.train(&train, &pairs, &mut rng).unwrap();
    assert!(curve.last().unwrap() < curve.first().unwrap(), "{curve:?}");
    for s in test.iter().filter(|s| s.identity == 0) {
        assert_eq!(model.predict_identity(s).unwrap().0, 0);
    }
}

fn micro_run() -> (Vec<f64>, Vec<u8>) {
    let mut rng = Rng::new(2024);
    let cfg = ExperimentConfig { epochs: 2, batch: 2, episodes: 4, ..small("CNN:ACC+LSTM:HR") };
    let samples = random_samples(&cfg, 4, 2, &mut rng);
    let pairs = vec![
        TrainingPair { left: 0, right: 2, similar: true, left_identity: 0, right_identity: 0 },
        TrainingPair { left: 1, right: 3, similar: true, left_identity: 1, right_identity: 1 },
        TrainingPair { left: 0, right: 1, similar: false, left_identity: 0, right_identity: 1 },
        TrainingPair { left: 3, right: 2, similar: false, left_identity: 1, right_identity: 0 },
    ];
    let mut model = Mmsnn32::new(cfg, 2, &mut rng).unwrap();
    let curve = model.train(&samples, &pairs, &mut rng).unwrap();
    (curve, model.to_container().to_bytes().unwrap())
}

#[test]
fn micro_run_matches_pinned_curve() {
    let (curve, _) = micro_run();
    // Produced by this implementation; any change to initialization, sampling
    // order or arithmetic shows up here.
    let golden = [8.654060169070005, 11.21075055002668];
    assert_eq!(curve.len(), golden.len());
    for (c, g) in curve.iter().zip(golden) {
        assert!((c - g).abs() < 1e-5, "{curve:?}");
    }
}

#[test]
fn same_seed_gives_bitwise_identical_checkpoints() {
    assert_eq!(micro_run().1, micro_run().1);
}

#[test]
fn checkpoint_round_trip_preserves_predictions() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = Rng::new(10);
    let train = hr_cohort(&mut rng, 4);
    let cfg = ExperimentConfig { epochs: 1, episodes: 16, ..small("LSTM:HR") };
    let keys: Vec<(usize, u8)> = train.iter().map(|s| (s.identity, s.gesture)).collect();
    let pairs = make_pairs(&keys, 16, 0.5, &mut rng).unwrap();
    let mut model = Mmsnn32::new(cfg, 5, &mut rng).unwrap();
    model.train(&train, &pairs, &mut rng).unwrap();
    let path = dir.path().join("m.ckpt");
    model.save(&path).unwrap();
    let back = Mmsnn32::load(&path).unwrap();
    let refs: Vec<&Sample> = train.iter().collect();
    assert_eq!(model.predict_batch(&refs).unwrap(), back.predict_batch(&refs).unwrap());
    assert_eq!(back.to_container().to_bytes().unwrap(), model.to_container().to_bytes().unwrap());
    assert!(Mmsnn::<f64>::load(&dir.path().join("missing")).is_err());
}
