use std::path::{Path, PathBuf};

use physiogait_core::ingest::{parse_e4_folder, write_e4_folder, IngestWarning, Recording};
use physiogait_core::synthgen::{generate_cohort, CohortSpec};
use physiogait_core::{Channel, Error};

fn golden() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/e4_golden")
}

#[test]
fn golden_folder_values() {
    let parsed = parse_e4_folder(&golden()).unwrap();
    assert!(parsed.warnings.is_empty());
    let rec = parsed.recording;
    let x = rec.stream(Channel::AccX).unwrap();
    assert_eq!(x.sample_rate_hz(), 32.0);
    assert_eq!(x.values(), &[1.0, -0.5, 0.0]);
    assert_eq!(rec.stream(Channel::AccY).unwrap().values(), &[0.0, 0.25, 0.0]);
    assert_eq!(rec.stream(Channel::AccZ).unwrap().values(), &[0.0, 1.0, 1.0]);

    let eda = rec.stream(Channel::Eda).unwrap();
    assert_eq!(eda.start_time_s(), 1_588_000_000.0);
    assert_eq!(eda.sample_rate_hz(), 4.0);
    assert_eq!(eda.values(), &[0.31, 0.312, 0.309]);
    assert_eq!(rec.stream(Channel::Ppg).unwrap().values(), &[-12.5, 3.25, 0.1]);
    assert_eq!(rec.stream(Channel::Temp).unwrap().values(), &[33.17, 33.19]);

    let ibi = rec.stream(Channel::DerivedIbi).unwrap();
    assert_eq!(ibi.values(), &[0.75; 6]);
}

fn copy_without(skip: &str) -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    for f in ["ACC.csv", "EDA.csv", "BVP.csv", "TEMP.csv"] {
        if f != skip {
            std::fs::copy(golden().join(f), dir.path().join(f)).unwrap();
        }
    }
    dir
}

#[test]
fn missing_bvp_is_reported() {
    let dir = copy_without("BVP.csv");
    match parse_e4_folder(dir.path()) {
        Err(Error::MissingFile(f)) => assert_eq!(f, "BVP.csv"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn rate_mismatch_warns_and_uses_declared_rate() {
    let dir = copy_without("");
    std::fs::write(dir.path().join("EDA.csv"), "100.0\n8.0\n0.5\n0.6\n").unwrap();
    let parsed = parse_e4_folder(dir.path()).unwrap();
    assert_eq!(parsed.recording.stream(Channel::Eda).unwrap().sample_rate_hz(), 8.0);
    assert!(matches!(parsed.warnings.as_slice(), [IngestWarning::RateMismatch { declared_hz, .. }] if *declared_hz == 8.0));
}

#[test]
fn malformed_header_row_is_named() {
    let dir = copy_without("");
    std::fs::write(dir.path().join("TEMP.csv"), "100.0\nfast\n33.0\n").unwrap();
    assert!(matches!(parse_e4_folder(dir.path()), Err(Error::MalformedHeader { row: 2, .. })));
}

#[test]
fn synthetic_recording_round_trips_bitwise() {
    let spec = CohortSpec { n_subjects: 2, episodes_per_subject: 3, ..Default::default() };
    let r = generate_cohort(&spec).unwrap().remove(1);
    let dir = tempfile::tempdir().unwrap();
    let folder = write_e4_folder(&r.recording, &dir.path().join("S02")).unwrap();
    let back = parse_e4_folder(&folder).unwrap().recording;
    for (ch, s) in &r.recording.streams {
        let b = back.stream(*ch).unwrap();
        assert_eq!(b.sample_rate_hz(), s.sample_rate_hz());
        assert_eq!(b.start_time_s(), s.start_time_s());
        let same = s.values().iter().zip(b.values()).all(|(x, y)| x.to_bits() == y.to_bits());
        assert!(same && b.len() == s.len(), "{ch}");
    }

    let file = dir.path().join("rec.pgc");
    r.recording.write(&file).unwrap();
    assert_eq!(Recording::read(&file).unwrap(), r.recording);
}
