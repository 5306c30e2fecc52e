use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the signal-processing layer.
#[derive(Debug, Error)]
pub enum Error {
    #[error("stream is empty or too short for this operation")]
    EmptyStream,
    #[error("non-finite sample at index {0}")]
    NonFiniteSample(usize),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("requested interval does not overlap the stream")]
    NoOverlap,
    #[error("missing file: {0}")]
    MissingFile(String),
    #[error("malformed header in row {row}: {reason}")]
    MalformedHeader { row: usize, reason: String },
    #[error("malformed data in {file} row {row}: {reason}")]
    MalformedRow { file: String, row: usize, reason: String },
    #[error("streams share no common time interval")]
    NoCommonInterval,
    #[error("recording is missing channel {0}")]
    MissingChannel(String),
    #[error("window too short: need at least {needed} samples, got {got}")]
    WindowTooShort { needed: usize, got: usize },
    #[error("stream too short: need at least {needed} samples, got {got}")]
    StreamTooShort { needed: usize, got: usize },
    #[error("signal too short: need at least {needed} samples, got {got}")]
    SignalTooShort { needed: usize, got: usize },
    #[error("signal too long: at most {max} samples, got {got}")]
    SignalTooLong { max: usize, got: usize },
    #[error("degenerate training set: {0}")]
    DegenerateTrainingSet(String),
    #[error("invalid Bateman constants: decay {tau_decay} must exceed rise {tau_rise} > 0")]
    InvalidTaus { tau_rise: f64, tau_decay: f64 },
    #[error("negative skin conductance sample at index {0}")]
    NegativeInput(usize),
    #[error("too few pulse peaks: need {needed}, got {got}")]
    TooFewPeaks { needed: usize, got: usize },
    #[error("container format error: {0}")]
    Container(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
