use std::path::Path;
use std::process::{Command, Output};

fn physiogait(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_physiogait"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn unknown_subcommand_is_a_usage_error() {
    let out = physiogait(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!out.stderr.is_empty());
}

#[test]
fn bad_flag_value_is_a_usage_error() {
    let out = physiogait(&["synth", "--subjects", "many", "--out", "x"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_input_is_a_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = physiogait(&["derive", "--input", path(&dir.path().join("absent.pgc")), "--out", path(&dir.path().join("o.pgc"))]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));
    assert!(!dir.path().join("o.pgc").exists());
}

#[test]
fn synth_then_train_twice_is_bitwise_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cohort = dir.path().join("cohort");
    let out = physiogait(&["--seed", "7", "synth", "--subjects", "3", "--episodes", "24", "--out", path(&cohort)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for s in 0..3 {
        let folder = cohort.join(format!("S{:02}", s + 1));
        for f in ["ACC.csv", "BVP.csv", "EDA.csv", "TEMP.csv", "truth.json"] {
            assert!(folder.join(f).is_file(), "{} missing in {}", f, folder.display());
        }
    }

    let cfg = dir.path().join("small.toml");
    let base = physiogait_nn::ExperimentConfig::preset("P3").unwrap();
    let small = physiogait_nn::ExperimentConfig { epochs: 2, episodes: 24, width_divisor: 8, ..base };
    std::fs::write(&cfg, small.to_toml()).unwrap();

    let mut ckpts = Vec::new();
    for run in 0..2 {
        let ckpt = dir.path().join(format!("model{run}.ckpt"));
        let out = physiogait(&["train", "--config", path(&cfg), "--data", path(&cohort), "--windows", "truth", "--out", path(&ckpt)]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        ckpts.push(std::fs::read(&ckpt).unwrap());
    }
    assert!(!ckpts[0].is_empty());
    assert_eq!(ckpts[0], ckpts[1]);
}

#[test]
fn ingest_derive_and_decompose_a_recording() {
    let dir = tempfile::tempdir().unwrap();
    let cohort = dir.path().join("cohort");
    assert!(physiogait(&["synth", "--subjects", "1", "--episodes", "4", "--out", path(&cohort)]).status.success());
    let e4 = cohort.join("S01");
    let rec = dir.path().join("s01.pgc");
    let out = physiogait(&["ingest", "--input", path(&e4), "--align", "--out", path(&rec)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let derived = dir.path().join("derived.pgc");
    assert!(physiogait(&["derive", "--input", path(&rec), "--out", path(&derived)]).status.success());
    let d = physiogait_core::Recording::read(&derived).unwrap();
    assert!(d.stream(physiogait_core::Channel::DerivedHr).is_ok());

    let csv = dir.path().join("eda.csv");
    let out = physiogait(&["eda-decompose", "--input", path(&e4), "--out", path(&csv)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("time_s,eda,tonic,phasic,driver\n"));
    assert!(text.lines().count() > 100);

    let png = dir.path().join("w.png");
    let out = physiogait(&["encode", "--input", path(&rec), "--channel", "acc", "--start-s", "30", "--end-s", "33", "--out", path(&png)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(std::fs::read(&png).unwrap().starts_with(b"\x89PNG"));
}
