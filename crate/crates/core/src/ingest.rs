//! Empatica E4 recording folders and the binary recording container.
//!
//! An E4 CSV holds one column per axis. Row 1 is the UNIX start time (repeated
//! per column), row 2 the sample rate in Hz, and every following row one
//! sample. `ACC.csv` stores x, y, z in units of 1/64 g; `EDA.csv` microsiemens;
//! `TEMP.csv` degrees Celsius; `BVP.csv` the dimensionless optical pulse.
//! `IBI.csv` (optional) starts with `start, IBI` and then lists
//! `offset_s, interval_s` rows for detected beats.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::container::{write_atomic, Block, Container};
use crate::error::{Error, Result};
use crate::stream::{Channel, SensorStream};

pub const ACC_RATE_HZ: f64 = 32.0;
pub const BVP_RATE_HZ: f64 = 64.0;
pub const EDA_RATE_HZ: f64 = 4.0;
pub const TEMP_RATE_HZ: f64 = 4.0;
/// Grid used for beat-interval series held between beats.
pub const IBI_RATE_HZ: f64 = 4.0;
/// Accelerometer counts per g.
pub const ACC_COUNTS_PER_G: f64 = 64.0;

const RECORDING_KIND: &str = "recording";

/// All channels captured from one subject.
#[derive(Clone, Debug, PartialEq)]
pub struct Recording {
    pub subject_id: String,
    pub streams: BTreeMap<Channel, SensorStream>,
    pub source_path: String,
}

/// Non-fatal findings while parsing.
#[derive(Clone, Debug, PartialEq)]
pub enum IngestWarning {
    /// A file declared a rate other than the device default; the declared rate is used.
    RateMismatch { file: String, declared_hz: f64, expected_hz: f64 },
}

#[derive(Clone, Debug)]
pub struct ParsedRecording {
    pub recording: Recording,
    pub warnings: Vec<IngestWarning>,
}

impl Recording {
    pub fn new(subject_id: impl Into<String>, source_path: impl Into<String>) -> Self {
        Self { subject_id: subject_id.into(), streams: BTreeMap::new(), source_path: source_path.into() }
    }

    pub fn insert(&mut self, stream: SensorStream) {
        self.streams.insert(stream.channel(), stream);
    }

    pub fn stream(&self, channel: Channel) -> Result<&SensorStream> {
        self.streams.get(&channel).ok_or_else(|| Error::MissingChannel(channel.to_string()))
    }

    pub fn has_acc(&self) -> bool {
        [Channel::AccX, Channel::AccY, Channel::AccZ].iter().all(|c| self.streams.contains_key(c))
    }

    /// Serialize into the recording container: a JSON header describing
    /// channels, rates and start times, then one little-endian f64 block per channel.
    pub fn to_container(&self) -> Container {
        let channels: Vec<serde_json::Value> = self
            .streams
            .values()
            .map(|s| {
                serde_json::json!({
                    "channel": s.channel(),
                    "sample_rate_hz": s.sample_rate_hz(),
                    "start_time_s": s.start_time_s(),
                    "len": s.len(),
                })
            })
            .collect();
        let meta = serde_json::json!({
            "format_version": crate::container::FORMAT_VERSION,
            "subject_id": self.subject_id,
            "source_path": self.source_path,
            "channels": channels,
        });
        let mut c = Container::new(RECORDING_KIND, meta);
        for s in self.streams.values() {
            c.push(Block::f64(s.channel().name(), s.values().to_vec()));
        }
        c
    }

    pub fn from_container(c: &Container) -> Result<Self> {
        if c.kind != RECORDING_KIND {
            return Err(Error::Container(format!("expected a recording, found {:?}", c.kind)));
        }
        #[derive(Deserialize)]
        struct ChannelMeta {
            channel: Channel,
            sample_rate_hz: f64,
            start_time_s: f64,
        }
        #[derive(Deserialize)]
        struct Meta {
            subject_id: String,
            source_path: String,
            channels: Vec<ChannelMeta>,
        }
        let meta: Meta = serde_json::from_value(c.meta.clone())?;
        let mut rec = Recording::new(meta.subject_id, meta.source_path);
        for ch in meta.channels {
            let values = c.block(ch.channel.name())?.to_f64();
            rec.insert(SensorStream::new(ch.channel, values, ch.sample_rate_hz, ch.start_time_s)?);
        }
        Ok(rec)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        self.to_container().write(path)
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_container(&Container::read(path)?)
    }
}

fn read_file(dir: &Path, name: &str) -> Result<Option<String>> {
    let path = dir.join(name);
    match fs::read_to_string(&path) {
        Ok(s) => Ok(Some(s)),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
        Err(e) => Err(Error::io(path, e)),
    }
}

fn parse_fields(line: &str, row: usize, file: &str, header: bool) -> Result<Vec<f64>> {
    line.split(',')
        .map(|f| {
            f.trim().parse::<f64>().map_err(|e| {
                let reason = format!("{file}: cannot parse {:?}: {e}", f.trim());
                if header {
                    Error::MalformedHeader { row, reason }
                } else {
                    Error::MalformedRow { file: file.to_string(), row, reason }
                }
            })
        })
        .collect()
}

/// One E4 CSV: start time, declared rate and column-major samples.
struct E4Csv {
    start_time_s: f64,
    rate_hz: f64,
    columns: Vec<Vec<f64>>,
}

fn parse_e4_csv(text: &str, file: &str, n_cols: usize) -> Result<E4Csv> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, first) = lines.next().ok_or(Error::MalformedHeader { row: 1, reason: format!("{file}: empty file") })?;
    let starts = parse_fields(first, 1, file, true)?;
    let (_, second) = lines.next().ok_or(Error::MalformedHeader { row: 2, reason: format!("{file}: missing rate row") })?;
    let rates = parse_fields(second, 2, file, true)?;
    if starts.len() != n_cols || rates.len() != n_cols {
        return Err(Error::MalformedHeader { row: 1, reason: format!("{file}: expected {n_cols} columns") });
    }
    if starts.iter().any(|&s| s != starts[0]) {
        return Err(Error::MalformedHeader { row: 1, reason: format!("{file}: start times differ between columns") });
    }
    if rates.iter().any(|&r| r != rates[0]) || !(rates[0] > 0.0) {
        return Err(Error::MalformedHeader { row: 2, reason: format!("{file}: invalid sample rate") });
    }
    let mut columns = vec![Vec::new(); n_cols];
    for (idx, line) in lines {
        let vals = parse_fields(line, idx + 1, file, false)?;
        if vals.len() != n_cols {
            return Err(Error::MalformedRow {
                file: file.to_string(),
                row: idx + 1,
                reason: format!("expected {n_cols} columns, got {}", vals.len()),
            });
        }
        for (c, v) in columns.iter_mut().zip(vals) {
            c.push(v);
        }
    }
    Ok(E4Csv { start_time_s: starts[0], rate_hz: rates[0], columns })
}

/// Parse an E4 folder (`ACC.csv`, `EDA.csv`, `BVP.csv`, `TEMP.csv`, optional `IBI.csv`).
pub fn parse_e4_folder(path: &Path) -> Result<ParsedRecording> {
    let subject_id = path
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "subject".into());
    let mut rec = Recording::new(subject_id, path.display().to_string());
    let mut warnings = Vec::new();

    let specs: [(&str, &[Channel], f64, f64); 4] = [
        ("ACC.csv", &[Channel::AccX, Channel::AccY, Channel::AccZ], ACC_RATE_HZ, ACC_COUNTS_PER_G),
        ("EDA.csv", &[Channel::Eda], EDA_RATE_HZ, 1.0),
        ("BVP.csv", &[Channel::Ppg], BVP_RATE_HZ, 1.0),
        ("TEMP.csv", &[Channel::Temp], TEMP_RATE_HZ, 1.0),
    ];
    for (file, channels, expected_hz, scale) in specs {
        let text = read_file(path, file)?.ok_or_else(|| Error::MissingFile(file.to_string()))?;
        let csv = parse_e4_csv(&text, file, channels.len())?;
        if csv.rate_hz != expected_hz {
            log::warn!("{file}: declared rate {} Hz differs from expected {expected_hz} Hz", csv.rate_hz);
            warnings.push(IngestWarning::RateMismatch {
                file: file.to_string(),
                declared_hz: csv.rate_hz,
                expected_hz,
            });
        }
        for (&ch, col) in channels.iter().zip(csv.columns) {
            let values = if scale == 1.0 { col } else { col.into_iter().map(|v| v / scale).collect() };
            rec.insert(SensorStream::new(ch, values, csv.rate_hz, csv.start_time_s)?);
        }
    }
    if let Some(text) = read_file(path, "IBI.csv")? {
        if let Some(ibi) = parse_ibi(&text)? {
            rec.insert(ibi);
        }
    }
    Ok(ParsedRecording { recording: rec, warnings })
}

/// Parse `IBI.csv` into a previous-value-held interval series on the 4 Hz grid.
/// Returns `None` when the file lists no beats.
fn parse_ibi(text: &str) -> Result<Option<SensorStream>> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, first) = lines.next().ok_or(Error::MalformedHeader { row: 1, reason: "IBI.csv: empty file".into() })?;
    let start = first
        .split(',')
        .next()
        .and_then(|f| f.trim().parse::<f64>().ok())
        .ok_or(Error::MalformedHeader { row: 1, reason: "IBI.csv: bad start time".into() })?;
    let mut beats = Vec::new();
    for (idx, line) in lines {
        let v = parse_fields(line, idx + 1, "IBI.csv", false)?;
        if v.len() != 2 {
            return Err(Error::MalformedRow { file: "IBI.csv".into(), row: idx + 1, reason: "expected offset,interval".into() });
        }
        beats.push((v[0], v[1]));
    }
    if beats.is_empty() {
        return Ok(None);
    }
    let end = beats.last().unwrap().0;
    let n = (end * IBI_RATE_HZ).floor() as usize + 1;
    let mut values = Vec::with_capacity(n);
    let mut k = 0;
    for i in 0..n {
        let t = i as f64 / IBI_RATE_HZ;
        while k + 1 < beats.len() && beats[k + 1].0 <= t {
            k += 1;
        }
        values.push(beats[k].1);
    }
    Ok(Some(SensorStream::new(Channel::DerivedIbi, values, IBI_RATE_HZ, start)?))
}

fn write_csv(dir: &Path, file: &str, streams: &[&SensorStream], scale: f64) -> Result<()> {
    let first = streams[0];
    let mut out = String::new();
    let row = |v: f64| vec![v.to_string(); streams.len()].join(",");
    writeln!(out, "{}", row(first.start_time_s())).unwrap();
    writeln!(out, "{}", row(first.sample_rate_hz())).unwrap();
    for i in 0..first.len() {
        let fields: Vec<String> = streams.iter().map(|s| (s.values()[i] * scale).to_string()).collect();
        writeln!(out, "{}", fields.join(",")).unwrap();
    }
    write_atomic(&dir.join(file), out.as_bytes())
}

/// Write the raw channels of `recording` as an E4 folder. Values are printed in
/// shortest round-trip form, so re-parsing reproduces every sample bit for bit.
pub fn write_e4_folder(recording: &Recording, dir: &Path) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let acc = [
        recording.stream(Channel::AccX)?,
        recording.stream(Channel::AccY)?,
        recording.stream(Channel::AccZ)?,
    ];
    if acc.iter().any(|s| s.len() != acc[0].len() || s.start_time_s() != acc[0].start_time_s()) {
        return Err(Error::InvalidParameter("accelerometer axes must share length and start".into()));
    }
    write_csv(dir, "ACC.csv", &acc, ACC_COUNTS_PER_G)?;
    write_csv(dir, "EDA.csv", &[recording.stream(Channel::Eda)?], 1.0)?;
    write_csv(dir, "BVP.csv", &[recording.stream(Channel::Ppg)?], 1.0)?;
    write_csv(dir, "TEMP.csv", &[recording.stream(Channel::Temp)?], 1.0)?;
    Ok(dir.to_path_buf())
}

/// Trim all streams to the maximal common wall-clock interval `[t0, t1)`,
/// where `t0` is the latest start and `t1` the earliest end. A sample is kept
/// when its sampling period `[t_k, t_k + 1/rate)` overlaps the interval, so
/// the stream defining each bound is untouched and `align` is idempotent.
pub fn align(recording: &Recording) -> Result<Recording> {
    let t0 = recording.streams.values().map(|s| s.start_time_s()).fold(f64::NEG_INFINITY, f64::max);
    let t1 = recording.streams.values().map(|s| s.end_time_s()).fold(f64::INFINITY, f64::min);
    if !(t0 < t1) {
        return Err(Error::NoCommonInterval);
    }
    let mut out = Recording::new(recording.subject_id.clone(), recording.source_path.clone());
    for s in recording.streams.values() {
        let n = s.len() as f64;
        let lo = (((t0 - s.start_time_s()) * s.sample_rate_hz() + 1e-9).floor()).clamp(0.0, n) as usize;
        let hi = (((t1 - s.start_time_s()) * s.sample_rate_hz() - 1e-9).ceil()).clamp(0.0, n) as usize;
        match s.slice_samples(lo, hi) {
            Ok(sl) => out.insert(sl),
            Err(Error::NoOverlap) => return Err(Error::NoCommonInterval),
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

/// Summary of a recording for logs and CLI output.
#[derive(Clone, Debug, Serialize)]
pub struct ChannelSummary {
    pub channel: Channel,
    pub sample_rate_hz: f64,
    pub start_time_s: f64,
    pub len: usize,
}

pub fn summarize(recording: &Recording) -> Vec<ChannelSummary> {
    recording
        .streams
        .values()
        .map(|s| ChannelSummary {
            channel: s.channel(),
            sample_rate_hz: s.sample_rate_hz(),
            start_time_s: s.start_time_s(),
            len: s.len(),
        })
        .collect()
}
