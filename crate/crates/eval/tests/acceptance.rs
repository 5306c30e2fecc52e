//! End-to-end acceptance suite. Every criterion prints one PASS/FAIL line;
//! the process exits non-zero if any criterion fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;
use std::time::Instant;

use physiogait_core::gesture::SvmParams;
use physiogait_core::ingest::{parse_e4_folder, write_e4_folder};
use physiogait_core::physio::{br_stream, detect_pulses, hr_stream};
use physiogait_core::rpimage::{encode_window, modified_rp_matrix};
use physiogait_core::scdecomp::{decompose, phasic_from_driver, spike_recall, BatemanParams, DecomposeOptions};
use physiogait_core::synthgen::{generate_cohort, render_recording, sample_profiles, CohortSpec, Rendered};
use physiogait_core::{stats, Channel, Rng};
use physiogait_eval::gestures::gesture_pipeline;
use physiogait_eval::{
    accuracy_metrics, episode_sweep, labelled, read_cohort, run_ablation, write_cohort, AblationOptions, Dataset, EvalReport,
    WindowSource,
};
use physiogait_nn::autodiff::gradcheck::{check_gradients, SequentialObjective};
use physiogait_nn::autodiff::loss::{contrastive, softmax};
use physiogait_nn::autodiff::{LayerSpec, Sequential};
use physiogait_nn::mmsnn::{make_pairs, EncoderKind, ModalityInput, PairObjective, Sample, TrainingPair, IMAGE_SHAPE};
use physiogait_nn::{ExperimentConfig, Mmsnn32, Mmsnn64};

/// Training settings of the re-identification and sweep experiments.
const REID_EPOCHS: usize = 15;
const REID_LR: f64 = 2e-4;

type Check = Result<String, String>;

fn ensure(ok: bool, detail: String) -> Check {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn gradients() -> Check {
    let start = Instant::now();
    let layers: Vec<(Vec<LayerSpec>, Vec<usize>, usize)> = vec![
        (vec![LayerSpec::conv(3, 3)], vec![2, 6, 7], 2),
        (vec![LayerSpec::MaxPool], vec![2, 5, 7], 2),
        (vec![LayerSpec::batch_norm()], vec![3, 4, 5], 3),
        (vec![LayerSpec::batch_norm()], vec![6, 3], 3),
        (vec![LayerSpec::Dropout { p: 0.5 }, LayerSpec::Dense { out: 3 }], vec![8], 4),
        (vec![LayerSpec::Dense { out: 4 }, LayerSpec::Relu, LayerSpec::Dense { out: 3 }], vec![5], 3),
        (vec![LayerSpec::Lstm { hidden: 4, return_sequences: false }], vec![6, 3], 2),
        (vec![LayerSpec::Lstm { hidden: 3, return_sequences: true }], vec![5, 2], 2),
    ];
    let mut rng = Rng::new(11);
    let mut worst: f64 = 0.0;
    for (specs, shape, batch) in &layers {
        let net = Sequential::<f64>::new(specs, shape, &mut rng).map_err(|e| e.to_string())?;
        let mut obj = SequentialObjective::new(net, *batch, &mut rng).map_err(|e| e.to_string())?;
        let r = check_gradients(&mut obj, 1e-4, 1e-3, 200, &mut rng).map_err(|e| e.to_string())?;
        worst = worst.max(r.max_rel_error);
    }

    let cfg = ExperimentConfig { width_divisor: 8, ..ExperimentConfig::preset("P4").unwrap() };
    let samples: Vec<Sample> = (0..4)
        .map(|i| Sample {
            identity: i % 3,
            gesture: 0,
            inputs: cfg
                .encoders
                .iter()
                .map(|e| match e.kind {
                    EncoderKind::Cnn => {
                        let n: usize = IMAGE_SHAPE.iter().product();
                        ModalityInput::Image(Arc::new((0..n).map(|_| rng.uniform() as f32).collect()))
                    }
                    EncoderKind::Lstm => ModalityInput::Sequence {
                        features: 1,
                        data: Arc::new((0..cfg.seq_len).map(|_| rng.normal() as f32).collect()),
                    },
                })
                .collect(),
        })
        .collect();
    let mut model = Mmsnn64::new(cfg, 3, &mut rng).map_err(|e| e.to_string())?;
    model.fit_normalization(&samples).map_err(|e| e.to_string())?;
    let pairs = vec![
        TrainingPair { left: 0, right: 3, similar: true, left_identity: 0, right_identity: 0 },
        TrainingPair { left: 1, right: 2, similar: false, left_identity: 1, right_identity: 2 },
    ];
    let mut obj = PairObjective { model, samples: &samples, pairs, dropout_seed: 3 };
    let r = check_gradients(&mut obj, 1e-4, 1e-3, 6, &mut rng).map_err(|e| e.to_string())?;
    let secs = start.elapsed().as_secs_f64();
    ensure(
        worst < 1e-3 && r.max_rel_error < 1e-3 && secs < 60.0,
        format!("layers max rel err {worst:.2e}, composite {:.2e} ({} entries), {secs:.1} s", r.max_rel_error, r.checked),
    )
}

fn eda_oracle() -> Check {
    let start = Instant::now();
    let cohort = generate_cohort(&CohortSpec::default()).map_err(|e| e.to_string())?;
    let (mut hits, mut total, mut min_r2, mut monotone) = (0, 0, f64::INFINITY, true);
    for r in &cohort {
        let eda = r.recording.stream(Channel::Eda).map_err(|e| e.to_string())?;
        let d = decompose(eda, &r.truth.profile.bateman(), &DecomposeOptions::default()).map_err(|e| e.to_string())?;
        min_r2 = min_r2.min(d.r_squared());
        monotone &= d.objective_trace.windows(2).all(|w| w[1] <= w[0]);
        let (h, t) = spike_recall(r.driver.values(), d.driver.values(), 1, 0.25);
        hits += h;
        total += t;
    }
    let recall = hits as f64 / total.max(1) as f64;
    let secs = start.elapsed().as_secs_f64();
    ensure(
        total > 0 && recall >= 0.95 && min_r2 >= 0.95 && monotone && secs < 120.0,
        format!("spike recall {hits}/{total} = {recall:.3}, min R² {min_r2:.4}, traces non-increasing {monotone}, {secs:.1} s"),
    )
}

/// RK4 on `τr τd y'' + (τr + τd) y' + y = u(t)`, with each driver sample
/// entering as an impulse of weight `u[k] dt` (a jump of `u[k] dt / (τr τd)` in `y'`).
fn rk4_phasic(u: &[f64], p: &BatemanParams, rate: f64, y0: f64, substeps: usize) -> Vec<f64> {
    let (a, b) = (p.tau_rise_s * p.tau_decay_s, p.tau_rise_s + p.tau_decay_s);
    let dt = 1.0 / rate;
    let h = dt / substeps as f64;
    let f = |y: f64, v: f64| (v, -(b * v + y) / a);
    // Free decay on the slow mode only: y(0) = y0, y'(0) = -y0 / τd.
    let (mut y, mut v) = (y0, -y0 / p.tau_decay_s);
    let mut out = Vec::with_capacity(u.len());
    for &uk in u {
        out.push(y);
        v += uk * dt / a;
        for _ in 0..substeps {
            let (k1y, k1v) = f(y, v);
            let (k2y, k2v) = f(y + 0.5 * h * k1y, v + 0.5 * h * k1v);
            let (k3y, k3v) = f(y + 0.5 * h * k2y, v + 0.5 * h * k2v);
            let (k4y, k4v) = f(y + h * k3y, v + h * k3v);
            y += h / 6.0 * (k1y + 2.0 * k2y + 2.0 * k3y + k4y);
            v += h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
        }
    }
    out
}

fn bateman_ode() -> Check {
    let mut rng = Rng::new(2024);
    let rate = 4.0;
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let p = BatemanParams::new(rng.uniform_in(0.3, 1.0), rng.uniform_in(1.5, 4.0)).unwrap();
        let u: Vec<f64> = (0..480).map(|_| if rng.bernoulli(0.05) { rng.uniform_in(0.1, 2.0) } else { 0.0 }).collect();
        let y0 = rng.uniform_in(0.0, 1.0);
        let closed = phasic_from_driver(&u, &p, rate, y0).map_err(|e| e.to_string())?;
        let ode = rk4_phasic(&u, &p, rate, y0, 64);
        let scale = ode.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let err = closed.iter().zip(&ode).fold(0.0f64, |m, (a, b)| m.max((a - b).abs())) / scale;
        worst = worst.max(err);
    }
    ensure(worst <= 0.01, format!("max relative error {worst:.2e} over 20 drivers"))
}

fn gesture_criterion(cohort: &[Rendered]) -> Check {
    let (r, _) = gesture_pipeline(&labelled(cohort), &SvmParams::default()).map_err(|e| e.to_string())?;
    ensure(
        r.f1 >= 0.9 && r.svm_macro_accuracy >= 0.85 && r.runtime_s < 300.0,
        format!(
            "detection F1 {:.3} (P {:.3}, R {:.3}), SVM macro accuracy {:.3} on {} held-out windows, {:.1} s",
            r.f1, r.precision, r.recall, r.svm_macro_accuracy, r.n_test, r.runtime_s
        ),
    )
}

fn ppg_fixtures() -> Check {
    let spec = CohortSpec { n_subjects: 1, episodes_per_subject: 8, ..Default::default() };
    let base = sample_profiles(&spec, &mut Rng::new(5)).remove(0);
    let (mut worst_hr, mut worst_br): (f64, f64) = (0.0, 0.0);
    for (i, (hr, br_hz)) in [(58.0, 0.18), (66.0, 0.25), (75.0, 0.3), (88.0, 0.36)].into_iter().enumerate() {
        let p = physiogait_core::synthgen::SubjectProfile { resting_hr_bpm: hr, br_hz, ..base.clone() };
        let r = render_recording(&p, &spec, &mut Rng::new(100 + i as u64)).map_err(|e| e.to_string())?;
        let ppg = r.recording.stream(Channel::Ppg).map_err(|e| e.to_string())?;
        let pulses = detect_pulses(ppg).map_err(|e| e.to_string())?;
        let est = hr_stream(&pulses, 4.0).map_err(|e| e.to_string())?;
        let truth: Vec<f64> = (0..est.len()).map(|k| r.hr.value_at(est.time_of(k))).collect();
        worst_hr = worst_hr.max((stats::mean(est.values()) - stats::mean(&truth)).abs());
        let br = br_stream(ppg, &pulses).map_err(|e| e.to_string())?;
        worst_br = worst_br.max((stats::median(br.stream.values()) - 60.0 * br_hz).abs());
    }
    ensure(
        worst_hr <= 2.0 && worst_br <= 1.0,
        format!("worst HR error {worst_hr:.2} BPM, worst BR error {worst_br:.2} breaths/min over 4 fixtures"),
    )
}

fn reid_config(name: &str) -> ExperimentConfig {
    ExperimentConfig { epochs: REID_EPOCHS, lr: REID_LR, ..ExperimentConfig::preset(name).unwrap() }
}

fn reid_options() -> AblationOptions {
    AblationOptions { folds: 5, max_folds: Some(1), fold_seed: 42 }
}

fn reidentification(ds: &Dataset, reports: &mut Vec<EvalReport>) -> Check {
    let start = Instant::now();
    let names = ["CNN:ACC", "LSTM:HR", "LSTM:BR", "LSTM:EDA", "P3", "P4"];
    let configs: Vec<ExperimentConfig> = names.iter().map(|n| reid_config(n)).collect();
    let table = run_ablation(ds, &configs, &reid_options()).map_err(|e| e.to_string())?;
    let acc = |name: &str| table.iter().find(|r| r.config_name == name).map(|r| r.top1_accuracy).unwrap();
    let best_uni = names[..4].iter().map(|n| acc(n)).fold(0.0, f64::max);
    let chance = 1.0 / ds.n_classes() as f64;
    let secs = start.elapsed().as_secs_f64();
    let rows: Vec<String> = table.iter().map(|r| format!("{} {:.3}", r.config_name, r.top1_accuracy)).collect();
    let ok = acc("CNN:ACC") >= 3.0 * chance
        && acc("P3") >= 0.85
        && acc("P3") >= best_uni - 0.02
        && acc("P4") >= best_uni - 0.02
        && secs < 900.0;
    reports.extend(table);
    ensure(
        ok,
        format!("top-1 {}; best 1-modal {best_uni:.3}; chance {chance:.3}; {secs:.0} s", rows.join(", ")),
    )
}

fn plateau(ds: &Dataset) -> Check {
    let cfg = reid_config("LSTM:BR");
    let rows = episode_sweep(ds, &cfg, &[50, 100, 200, 300, 400, 600], &reid_options()).map_err(|e| e.to_string())?;
    let at = |e: usize| rows.iter().find(|r| r.episodes == e).unwrap().top1_mean;
    let curve: Vec<String> = rows.iter().map(|r| format!("{}:{:.3}", r.episodes, r.top1_mean)).collect();
    ensure((at(400) - at(600)).abs() <= 0.01, format!("LSTM:BR curve {}", curve.join(" ")))
}

/// Synthesize, write and re-read E4 folders, derive channels, train a small
/// network and return its checkpoint bytes.
fn pipeline_checkpoint(dir: &std::path::Path) -> Vec<u8> {
    let spec = CohortSpec { n_subjects: 3, episodes_per_subject: 24, seed: 7, ..Default::default() };
    write_cohort(dir, &generate_cohort(&spec).unwrap()).unwrap();
    let members = read_cohort(dir).unwrap();
    let subjects = physiogait_eval::cohort::labelled_members(&members).unwrap();
    let ds = Dataset::from_labelled(&subjects, WindowSource::Truth).unwrap();
    let cfg = ExperimentConfig { width_divisor: 8, epochs: 2, episodes: 24, ..ExperimentConfig::preset("P3").unwrap() };
    let all: Vec<usize> = (0..ds.windows.len()).collect();
    let samples = ds.samples(&cfg, &all).unwrap();
    let root = Rng::new(cfg.seed);
    let keys: Vec<(usize, u8)> = samples.iter().map(|s| (s.identity, s.gesture)).collect();
    let pairs = make_pairs(&keys, cfg.episodes, cfg.ratio_similar, &mut root.split(1)).unwrap();
    let mut model = Mmsnn32::new(cfg, ds.n_classes(), &mut root.split(2)).unwrap();
    model.train(&samples, &pairs, &mut root.split(3)).unwrap();
    model.to_container().to_bytes().unwrap()
}

fn invariants(reports: &[EvalReport]) -> Check {
    let mut rng = Rng::new(99);
    let mut failures = Vec::new();

    // Recurrence plots: anti-symmetric matrix, affine-invariant image.
    let s: Vec<f64> = (0..40).map(|_| rng.normal()).collect();
    let m = modified_rp_matrix(&s).unwrap();
    let n = s.len();
    if !(0..n).all(|i| (0..n).all(|j| m[i * n + j] == -m[j * n + i])) {
        failures.push("RP anti-symmetry");
    }
    let t: Vec<f64> = s.iter().map(|v| 3.7 * v - 1.25).collect();
    let (a, b) = (encode_window(&[&s[..]]).unwrap(), encode_window(&[&t[..]]).unwrap());
    if a.pixels().iter().zip(b.pixels()).any(|(x, y)| (x - y).abs() > 1e-9) {
        failures.push("RP affine invariance");
    }

    // Softmax: simplex, and argmax unchanged by a constant added to every row of W.
    let w: Vec<Vec<f64>> = (0..5).map(|_| (0..4).map(|_| rng.normal()).collect()).collect();
    let eta: Vec<f64> = (0..4).map(|_| rng.normal()).collect();
    let c: Vec<f64> = (0..4).map(|_| rng.normal()).collect();
    let logits = |w: &[Vec<f64>]| -> Vec<f64> { w.iter().map(|r| r.iter().zip(&eta).map(|(a, b)| a * b).sum()).collect() };
    let argmax = |p: &[f64]| p.iter().enumerate().fold(0, |b, (i, &v)| if v > p[b] { i } else { b });
    let p = softmax(&logits(&w));
    let shifted: Vec<Vec<f64>> = w.iter().map(|r| r.iter().zip(&c).map(|(a, b)| a + b).collect()).collect();
    if (p.iter().sum::<f64>() - 1.0).abs() > 1e-6 || p.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
        failures.push("softmax simplex");
    }
    if argmax(&p) != argmax(&softmax(&logits(&shifted))) {
        failures.push("softmax shift argmax");
    }

    // Contrastive loss zero cases.
    let x: Vec<f64> = (0..6).map(|_| rng.normal()).collect();
    let far: Vec<f64> = x.iter().map(|v| v + 1.0).collect();
    if contrastive(&x, &x, true, 1.0).0 != 0.0 || contrastive(&x, &far, false, 1.0).0 != 0.0 {
        failures.push("contrastive zero cases");
    }

    // paper accuracy never below top-1.
    let preds: Vec<usize> = (0..200).map(|_| rng.below(6)).collect();
    let truths: Vec<usize> = (0..200).map(|_| rng.below(6)).collect();
    let m = accuracy_metrics(&preds, &truths, 6).unwrap();
    let ok = m.paper_accuracy >= m.top1_accuracy
        && reports.iter().all(|r| r.paper_accuracy >= r.top1_accuracy && r.folds.iter().all(|f| f.paper_accuracy >= f.top1_accuracy));
    if !ok {
        failures.push("paper accuracy >= top-1");
    }

    // E4 folders round-trip bitwise.
    let dir = tempfile::tempdir().unwrap();
    let spec = CohortSpec { n_subjects: 2, episodes_per_subject: 3, ..Default::default() };
    for r in generate_cohort(&spec).unwrap() {
        let folder = write_e4_folder(&r.recording, &dir.path().join(&r.recording.subject_id)).unwrap();
        let back = parse_e4_folder(&folder).unwrap().recording;
        let same = r.recording.streams.iter().all(|(ch, s)| {
            back.stream(*ch).is_ok_and(|b| {
                b.len() == s.len()
                    && b.sample_rate_hz() == s.sample_rate_hz()
                    && b.start_time_s().to_bits() == s.start_time_s().to_bits()
                    && s.values().iter().zip(b.values()).all(|(x, y)| x.to_bits() == y.to_bits())
            })
        });
        if !same {
            failures.push("E4 round trip");
        }
    }

    // Seed determinism across two full pipeline runs.
    let first = pipeline_checkpoint(&dir.path().join("run1"));
    let second = pipeline_checkpoint(&dir.path().join("run2"));
    if first != second {
        failures.push("pipeline checkpoints differ");
    }

    let detail = format!(
        "RP, softmax, contrastive, accuracy ordering ({} reports), E4 round trip, checkpoints {} bytes identical",
        reports.len(),
        first.len()
    );
    if failures.is_empty() {
        Ok(detail)
    } else {
        Err(format!("failed: {}", failures.join(", ")))
    }
}

fn main() {
    let mut results: Vec<(&str, Check)> = Vec::new();
    let mut run = |name: &'static str, f: &mut dyn FnMut() -> Check| {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            let msg = p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        let (tag, detail) = match &outcome {
            Ok(d) => ("PASS", d),
            Err(d) => ("FAIL", d),
        };
        println!("{tag} {name}: {detail} [{:.1} s]", start.elapsed().as_secs_f64());
        results.push((name, outcome));
    };

    let cohort = generate_cohort(&CohortSpec::default()).expect("default cohort");
    let dataset = Dataset::from_cohort(&cohort, WindowSource::Detected).expect("dataset");
    let mut reports = Vec::new();

    run("gradient correctness", &mut gradients);
    run("EDA deconvolution oracle", &mut eda_oracle);
    run("Bateman/ODE equivalence", &mut bateman_ode);
    run("gesture pipeline", &mut || gesture_criterion(&cohort));
    run("PPG derivations", &mut ppg_fixtures);
    run("re-identification", &mut || reidentification(&dataset, &mut reports));
    run("episode-count plateau", &mut || plateau(&dataset));
    run("invariant suites", &mut || invariants(&reports));

    let failed = results.iter().filter(|(_, r)| r.is_err()).count();
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
