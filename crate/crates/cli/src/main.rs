use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use physiogait_core::container::write_atomic;
use physiogait_core::gesture::{SvmModel, SvmParams};
use physiogait_core::ingest::{align, parse_e4_folder, summarize};
use physiogait_core::rpimage::encode_window;
use physiogait_core::scdecomp::{decompose, BatemanParams, DecomposeOptions};
use physiogait_core::synthgen::{generate_cohort, CohortSpec, NoiseSpec};
use physiogait_core::{Channel, Recording};
use physiogait_eval::cohort::{labelled_members, read_cohort, write_cohort};
use physiogait_eval::derive::derive_channels;
use physiogait_eval::gestures::{detect_recording, gesture_pipeline, window_features};
use physiogait_eval::report::{ablation_csv, ablation_plot_data, sweep_csv, sweep_plot_data, write_json, write_text};
use physiogait_eval::{episode_sweep, run_ablation, AblationOptions, Dataset, WindowSource};
use physiogait_nn::mmsnn::make_pairs;
use physiogait_nn::{ExperimentConfig, Mmsnn32};
use serde::Serialize;

/// Person re-identification from wrist gestures and physiology.
#[derive(Parser, Debug)]
#[command(name = "physiogait", version, about)]
struct Cli {
    /// Seed for every random choice. Overrides the seed of experiment configs when given.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Force single-threaded numerics.
    #[arg(long, global = true, default_value_t = true, action = clap::ArgAction::Set)]
    deterministic: bool,

    /// Worker threads for parallel stages (input encoding).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// error, warn, info, debug or trace.
    #[arg(long, global = true, default_value = "info")]
    log_level: String,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic cohort: one E4 folder per subject plus truth.json.
    Synth(SynthArgs),
    /// Parse an E4 folder into a recording container.
    Ingest(IngestArgs),
    /// Detect gestures in a recording, or fit the gesture classifier on a cohort.
    Gestures(GestureArgs),
    /// Split EDA into tonic and phasic parts and recover the SCR driver.
    EdaDecompose(EdaArgs),
    /// Add heart rate, IBI, BVP and breathing rate derived from PPG.
    Derive(DeriveArgs),
    /// Render the recurrence-plot image of one window as PNG.
    Encode(EncodeArgs),
    /// Train a re-identification network on every window of a cohort.
    Train(TrainArgs),
    /// Cross-validated accuracy of one or more configurations.
    Eval(EvalArgs),
    /// Accuracy against the number of training pairs.
    Sweep(SweepArgs),
}

#[derive(Args, Debug)]
struct SynthArgs {
    #[arg(long, default_value_t = 8)]
    subjects: usize,
    /// Gesture episodes per subject.
    #[arg(long, default_value_t = 60)]
    episodes: usize,
    /// Render without sensor noise.
    #[arg(long)]
    noise_free: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct IngestArgs {
    /// E4 folder (ACC.csv, BVP.csv, EDA.csv, TEMP.csv).
    #[arg(long)]
    input: PathBuf,
    /// Trim all channels to their common time span.
    #[arg(long)]
    align: bool,
    /// Output container (.pgc).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct GestureArgs {
    /// Fit the classifier on a cohort directory with truth sidecars.
    #[arg(long, requires = "data")]
    fit: bool,
    /// Cohort directory (with --fit).
    #[arg(long)]
    data: Option<PathBuf>,
    /// Recording to scan: E4 folder or .pgc container.
    #[arg(long, conflicts_with = "fit")]
    input: Option<PathBuf>,
    /// Fitted classifier used to label detections.
    #[arg(long, conflicts_with = "fit")]
    model: Option<PathBuf>,
    /// SVM box constraint.
    #[arg(long, default_value_t = 10.0)]
    c: f64,
    /// Classifier (with --fit) or detected windows as JSON.
    #[arg(long)]
    out: PathBuf,
    /// Detection and classification scores as JSON (with --fit).
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EdaArgs {
    /// Recording: E4 folder or .pgc container.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value_t = 0.7)]
    tau_rise: f64,
    #[arg(long, default_value_t = 2.0)]
    tau_decay: f64,
    /// Grid-search the Bateman constants instead of fixing them.
    #[arg(long)]
    refine_taus: bool,
    /// CSV with time_s, eda, tonic, phasic, driver.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct DeriveArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum EncodeChannel {
    Acc,
    Ppg,
    Eda,
    Temp,
}

#[derive(Args, Debug)]
struct EncodeArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum, default_value = "acc")]
    channel: EncodeChannel,
    /// Window start, seconds on the recording clock.
    #[arg(long)]
    start_s: f64,
    #[arg(long)]
    end_s: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Windows {
    /// True gesture spans from the sidecars.
    Truth,
    /// Detector output labelled by overlap with the true spans.
    Detected,
}

impl From<Windows> for WindowSource {
    fn from(w: Windows) -> Self {
        match w {
            Windows::Truth => WindowSource::Truth,
            Windows::Detected => WindowSource::Detected,
        }
    }
}

#[derive(Args, Debug)]
struct TrainArgs {
    /// TOML config file or preset (P1..P4, or e.g. CNN:ACC+LSTM:HR).
    #[arg(long)]
    config: String,
    /// Cohort directory.
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_enum, default_value = "detected")]
    windows: Windows,
    /// Checkpoint path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct ExperimentArgs {
    /// Cohort directory.
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_enum, default_value = "detected")]
    windows: Windows,
    #[arg(long, default_value_t = 5)]
    folds: usize,
    /// Run only the first N folds.
    #[arg(long)]
    max_folds: Option<usize>,
    /// Override the epoch count of every config.
    #[arg(long)]
    epochs: Option<usize>,
    /// Override the learning rate of every config.
    #[arg(long)]
    lr: Option<f64>,
    /// Output directory for CSV and JSON reports.
    #[arg(long)]
    out_dir: PathBuf,
    /// Also write x,y,err plot data.
    #[arg(long)]
    plot_data: bool,
}

#[derive(Args, Debug)]
struct EvalArgs {
    /// Comma-separated configs: files or presets.
    #[arg(long, value_delimiter = ',', required = true)]
    configs: Vec<String>,
    #[command(flatten)]
    common: ExperimentArgs,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[arg(long)]
    config: String,
    /// Episode counts to train with.
    #[arg(long, value_delimiter = ',', default_value = "50,100,200,300,400,600")]
    grid: Vec<usize>,
    #[command(flatten)]
    common: ExperimentArgs,
}

const DEFAULT_SEED: u64 = 42;

struct Globals {
    seed: Option<u64>,
    threads: usize,
}

impl Globals {
    fn seed(&self) -> u64 {
        self.seed.unwrap_or(DEFAULT_SEED)
    }
}

fn load_recording(path: &Path) -> Result<Recording> {
    if path.is_dir() {
        let parsed = parse_e4_folder(path)?;
        for w in &parsed.warnings {
            log::warn!("{}: {w:?}", path.display());
        }
        Ok(parsed.recording)
    } else {
        Recording::read(path).with_context(|| format!("reading {}", path.display()))
    }
}

fn load_config(arg: &str, g: &Globals, common: Option<&ExperimentArgs>) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(arg)?;
    if let Some(seed) = g.seed {
        cfg.seed = seed;
    }
    if let Some(c) = common {
        if let Some(e) = c.epochs {
            cfg.epochs = e;
        }
        if let Some(lr) = c.lr {
            cfg.lr = lr;
        }
    }
    cfg.validate()?;
    log::info!("experiment config {} (hash {}):\n{}", cfg.name, cfg.hash(), cfg.to_toml());
    Ok(cfg)
}

fn load_dataset(data: &Path, windows: Windows, g: &Globals) -> Result<Dataset> {
    let members = read_cohort(data)?;
    let subjects = labelled_members(&members)?;
    let mut ds = Dataset::from_labelled(&subjects, windows.into())?;
    ds.threads = g.threads;
    log::info!("{} subjects, {} windows from {}", ds.n_classes(), ds.windows.len(), data.display());
    Ok(ds)
}

fn ablation_options(c: &ExperimentArgs, g: &Globals) -> AblationOptions {
    AblationOptions { folds: c.folds, max_folds: c.max_folds, fold_seed: g.seed() }
}

#[derive(Serialize)]
struct DetectedWindow {
    start_sample: usize,
    end_sample: usize,
    start_s: f64,
    end_s: f64,
    label: Option<u8>,
}

fn synth(a: &SynthArgs, g: &Globals) -> Result<()> {
    let mut spec = CohortSpec { n_subjects: a.subjects, episodes_per_subject: a.episodes, seed: g.seed(), ..Default::default() };
    if a.noise_free {
        spec.noise = NoiseSpec::zero();
    }
    let cohort = generate_cohort(&spec)?;
    let folders = write_cohort(&a.out, &cohort)?;
    println!("wrote {} subject folders to {}", folders.len(), a.out.display());
    Ok(())
}

fn ingest(a: &IngestArgs) -> Result<()> {
    let mut rec = load_recording(&a.input)?;
    if a.align {
        rec = align(&rec)?;
    }
    for s in summarize(&rec) {
        log::info!("{s:?}");
    }
    rec.write(&a.out)?;
    println!("wrote {} channels to {}", rec.streams.len(), a.out.display());
    Ok(())
}

fn gestures(a: &GestureArgs) -> Result<()> {
    let params = SvmParams { c: a.c, ..SvmParams::default() };
    if a.fit {
        let data = a.data.as_ref().expect("required by clap");
        let members = read_cohort(data)?;
        let (report, model) = gesture_pipeline(&labelled_members(&members)?, &params)?;
        model.to_container().write(&a.out)?;
        if let Some(path) = &a.report {
            write_json(path, &report)?;
        }
        println!(
            "detection F1 {:.3}, classifier macro accuracy {:.3} on {} held-out windows",
            report.f1, report.svm_macro_accuracy, report.n_test
        );
        return Ok(());
    }
    let Some(input) = &a.input else {
        bail!("either --fit with --data, or --input is required");
    };
    let rec = load_recording(input)?;
    let model = match &a.model {
        Some(p) => Some(SvmModel::from_container(&physiogait_core::container::Container::read(p)?)?),
        None => None,
    };
    let acc = rec.stream(Channel::AccX)?;
    let found = detect_recording(&rec)?
        .into_iter()
        .map(|(s, e)| {
            let label = match &model {
                Some(m) => Some(m.predict(&window_features(&rec, s, e)?).0),
                None => None,
            };
            Ok(DetectedWindow { start_sample: s, end_sample: e, start_s: acc.time_of(s), end_s: acc.time_of(e), label })
        })
        .collect::<Result<Vec<_>>>()?;
    write_json(&a.out, &found)?;
    println!("{} gestures detected", found.len());
    Ok(())
}

fn eda_decompose(a: &EdaArgs) -> Result<()> {
    let rec = load_recording(&a.input)?;
    let params = BatemanParams::new(a.tau_rise, a.tau_decay)?;
    let opts = DecomposeOptions { refine_taus: a.refine_taus, ..DecomposeOptions::default() };
    let d = decompose(rec.stream(Channel::Eda)?, &params, &opts)?;
    let mut out = String::from("time_s,eda,tonic,phasic,driver\n");
    for k in 0..d.y.len() {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            d.y.time_of(k),
            d.y.values()[k],
            d.tonic.values()[k],
            d.phasic.values()[k],
            d.driver.values()[k]
        ));
    }
    write_atomic(&a.out, out.as_bytes())?;
    log::info!(
        "tau_rise {} s, tau_decay {} s, lambda_tonic {:.3e}, lambda_sparse {:.3e}, {} iterations, converged {}",
        d.params.tau_rise_s,
        d.params.tau_decay_s,
        d.lambda_tonic,
        d.lambda_sparse,
        d.iterations,
        d.converged
    );
    println!("R² {:.4}", d.r_squared());
    Ok(())
}

fn derive(a: &DeriveArgs) -> Result<()> {
    let rec = derive_channels(&load_recording(&a.input)?)?;
    rec.write(&a.out)?;
    println!("wrote {} channels to {}", rec.streams.len(), a.out.display());
    Ok(())
}

fn encode(a: &EncodeArgs) -> Result<()> {
    let rec = load_recording(&a.input)?;
    let channels: &[Channel] = match a.channel {
        EncodeChannel::Acc => &[Channel::AccX, Channel::AccY, Channel::AccZ],
        EncodeChannel::Ppg => &[Channel::Ppg],
        EncodeChannel::Eda => &[Channel::Eda],
        EncodeChannel::Temp => &[Channel::Temp],
    };
    let mut slices = Vec::new();
    for &ch in channels {
        let s = rec.stream(ch)?;
        let t0 = s.start_time_s();
        let first = ((a.start_s - t0) * s.sample_rate_hz()).ceil().max(0.0) as usize;
        let last = (((a.end_s - t0) * s.sample_rate_hz()).floor().max(0.0) as usize + 1).min(s.len());
        if last <= first {
            bail!("window {}..{} s is outside the {ch} stream", a.start_s, a.end_s);
        }
        slices.push(&s.values()[first..last]);
    }
    encode_window(&slices)?.write_png(&a.out)?;
    println!("wrote {}", a.out.display());
    Ok(())
}

fn train(a: &TrainArgs, g: &Globals) -> Result<()> {
    let cfg = load_config(&a.config, g, None)?;
    let ds = load_dataset(&a.data, a.windows, g)?;
    let all: Vec<usize> = (0..ds.windows.len()).collect();
    let samples = ds.samples(&cfg, &all)?;
    let root = physiogait_core::Rng::new(cfg.seed);
    let keys: Vec<(usize, u8)> = samples.iter().map(|s| (s.identity, s.gesture)).collect();
    let pairs = make_pairs(&keys, cfg.episodes, cfg.ratio_similar, &mut root.split(1))?;
    let mut model = Mmsnn32::new(cfg, ds.n_classes(), &mut root.split(2))?;
    let curve = model.train(&samples, &pairs, &mut root.split(3))?;
    model.save(&a.out)?;
    println!("final loss {:.6}; checkpoint {}", curve.last().copied().unwrap_or(f64::NAN), a.out.display());
    Ok(())
}

fn eval(a: &EvalArgs, g: &Globals) -> Result<()> {
    let configs = a.configs.iter().map(|c| load_config(c, g, Some(&a.common))).collect::<Result<Vec<_>>>()?;
    let ds = load_dataset(&a.common.data, a.common.windows, g)?;
    let reports = run_ablation(&ds, &configs, &ablation_options(&a.common, g))?;
    let dir = &a.common.out_dir;
    write_text(&dir.join("ablation.csv"), &ablation_csv(&reports)?)?;
    write_json(&dir.join("summary.json"), &reports)?;
    if a.common.plot_data {
        write_text(&dir.join("ablation.dat"), &ablation_plot_data(&reports))?;
    }
    for r in &reports {
        println!("{:<28} top-1 {:.4} ± {:.4}   paper {:.4} ± {:.4}", r.config_name, r.top1_accuracy, r.top1_std, r.paper_accuracy, r.paper_std);
    }
    Ok(())
}

fn sweep(a: &SweepArgs, g: &Globals) -> Result<()> {
    let cfg = load_config(&a.config, g, Some(&a.common))?;
    let ds = load_dataset(&a.common.data, a.common.windows, g)?;
    let rows = episode_sweep(&ds, &cfg, &a.grid, &ablation_options(&a.common, g))?;
    let dir = &a.common.out_dir;
    write_text(&dir.join("sweep.csv"), &sweep_csv(&rows)?)?;
    write_json(&dir.join("sweep.json"), &rows)?;
    if a.common.plot_data {
        write_text(&dir.join("sweep.dat"), &sweep_plot_data(&rows))?;
    }
    for r in &rows {
        println!("{:>5} episodes: top-1 {:.4} ± {:.4}", r.episodes, r.top1_mean, r.top1_std);
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    let threads = if cli.deterministic {
        1
    } else {
        cli.threads.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
    };
    if cli.deterministic && cli.threads.is_some_and(|t| t > 1) {
        log::warn!("--deterministic forces one worker thread");
    }
    let g = Globals { seed: cli.seed, threads };
    match &cli.command {
        Command::Synth(a) => synth(a, &g),
        Command::Ingest(a) => ingest(a),
        Command::Gestures(a) => gestures(a),
        Command::EdaDecompose(a) => eda_decompose(a),
        Command::Derive(a) => derive(a),
        Command::Encode(a) => encode(a),
        Command::Train(a) => train(a, &g),
        Command::Eval(a) => eval(a, &g),
        Command::Sweep(a) => sweep(a, &g),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    env_logger::Builder::new().parse_filters(&cli.log_level).format_timestamp(None).init();
    log::info!("resolved arguments: seed {}, {cli:?}", cli.seed.unwrap_or(DEFAULT_SEED));
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
