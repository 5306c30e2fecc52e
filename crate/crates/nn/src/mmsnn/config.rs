use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::autodiff::LayerSpec;
use crate::error::{Error, Result};

/// Signal an encoder consumes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Modality {
    /// Three accelerometer axes.
    Acc,
    /// Raw photoplethysmogram.
    Ppg,
    /// Heart rate derived from PPG pulses.
    Hr,
    /// Breathing rate derived from PPG modulation.
    Br,
    /// Skin conductance.
    Eda,
    /// Inter-beat intervals.
    Ibi,
    /// Skin temperature.
    Temp,
}

impl Modality {
    pub const ALL: [Modality; 7] =
        [Modality::Acc, Modality::Ppg, Modality::Hr, Modality::Br, Modality::Eda, Modality::Ibi, Modality::Temp];

    pub fn name(self) -> &'static str {
        match self {
            Modality::Acc => "ACC",
            Modality::Ppg => "PPG",
            Modality::Hr => "HR",
            Modality::Br => "BR",
            Modality::Eda => "EDA",
            Modality::Ibi => "IBI",
            Modality::Temp => "TEMP",
        }
    }

    /// Channels per time step.
    pub fn features(self) -> usize {
        if self == Modality::Acc { 3 } else { 1 }
    }
}

impl FromStr for Modality {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let up = s.trim().to_ascii_uppercase();
        let up = if up == "BVP" { "PPG".to_string() } else { up };
        Modality::ALL
            .into_iter()
            .find(|m| m.name() == up)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown modality {s:?}")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EncoderKind {
    /// Recurrence-plot image through the convolutional stack.
    Cnn,
    /// Resampled sequence through the recurrent stack.
    Lstm,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EncoderConfig {
    pub modality: Modality,
    pub kind: EncoderKind,
}

impl fmt::Display for EncoderConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let k = match self.kind {
            EncoderKind::Cnn => "CNN",
            EncoderKind::Lstm => "LSTM",
        };
        write!(f, "{k}:{}", self.modality.name())
    }
}

impl FromStr for EncoderConfig {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (k, m) = s
            .split_once(':')
            .ok_or_else(|| Error::InvalidConfig(format!("encoder {s:?} is not KIND:MODALITY")))?;
        let kind = match k.trim().to_ascii_uppercase().as_str() {
            "CNN" => EncoderKind::Cnn,
            "LSTM" => EncoderKind::Lstm,
            other => return Err(Error::InvalidConfig(format!("unknown encoder kind {other:?}"))),
        };
        Ok(Self { kind, modality: m.parse()? })
    }
}

/// How sequence inputs are standardized before the recurrent stack.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SeqNorm {
    /// Per-feature mean and standard deviation of the training windows,
    /// stored with the model. Absolute levels (resting heart rate, tonic
    /// conductance) stay visible to the network.
    Global,
    /// Each window z-normalized on its own; only shape survives.
    Window,
}

/// Everything needed to build and train one network. Serialized as TOML.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub encoders: Vec<EncoderConfig>,
    pub margin: f64,
    pub lambda_c: f64,
    pub lambda_id: f64,
    pub epochs: usize,
    pub batch: usize,
    pub lr: f64,
    pub seed: u64,
    /// Training pairs sampled per run.
    pub episodes: usize,
    pub ratio_similar: f64,
    pub dropout_image: f64,
    pub dropout_sequence: f64,
    /// Every layer width (and the embedding size) is divided by this, rounding up.
    pub width_divisor: usize,
    pub seq_len: usize,
    pub seq_norm: SeqNorm,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            name: "P1".into(),
            encoders: vec![EncoderConfig { modality: Modality::Acc, kind: EncoderKind::Cnn }],
            margin: 1.0,
            lambda_c: 1.0,
            lambda_id: 1.0,
            epochs: 20,
            batch: 16,
            lr: 1e-3,
            seed: 42,
            episodes: 300,
            ratio_similar: 0.5,
            dropout_image: 0.25,
            dropout_sequence: 0.3,
            width_divisor: 1,
            seq_len: 128,
            seq_norm: SeqNorm::Global,
        }
    }
}

pub const EMBED_DIM: usize = 40;

impl ExperimentConfig {
    /// `P1`..`P4`, or a `+`-joined encoder list such as `CNN:ACC+LSTM:HR`.
    pub fn preset(name: &str) -> Result<Self> {
        let list = match name.trim().to_ascii_uppercase().as_str() {
            "P1" => "CNN:ACC",
            "P2" => "LSTM:PPG",
            "P3" => "CNN:ACC+LSTM:HR+LSTM:BR",
            "P4" => "CNN:ACC+LSTM:HR+LSTM:BR+LSTM:EDA",
            _ => name,
        };
        let encoders = list.split('+').map(str::parse).collect::<Result<Vec<EncoderConfig>>>()?;
        let cfg = Self { name: name.trim().to_string(), encoders, ..Self::default() };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// A TOML file, or a preset name when `arg` is not an existing path.
    pub fn load(arg: &str) -> Result<Self> {
        let path = Path::new(arg);
        if path.is_file() {
            let text = std::fs::read_to_string(path).map_err(|e| Error::InvalidConfig(format!("{arg}: {e}")))?;
            Self::from_toml(&text)
        } else {
            Self::preset(arg)
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.into()));
        if self.encoders.is_empty() || self.encoders.len() > 4 {
            return bad("between 1 and 4 encoders are required");
        }
        if self.epochs == 0 || self.batch == 0 || self.episodes == 0 || self.width_divisor == 0 {
            return bad("epochs, batch, episodes and width_divisor must be positive");
        }
        if self.seq_len < 2 {
            return bad("seq_len must be at least 2");
        }
        if !(self.lr > 0.0) || !(self.margin > 0.0) || !(self.lambda_c >= 0.0) || !(self.lambda_id >= 0.0) {
            return bad("lr and margin must be positive, loss weights non-negative");
        }
        if !(0.0..=1.0).contains(&self.ratio_similar) {
            return bad("ratio_similar must be in [0, 1]");
        }
        if !(0.0..1.0).contains(&self.dropout_image) || !(0.0..1.0).contains(&self.dropout_sequence) {
            return bad("dropout rates must be in [0, 1)");
        }
        Ok(())
    }

    /// Canonical label such as `CNN:ACC+LSTM:HR`.
    pub fn encoder_label(&self) -> String {
        self.encoders.iter().map(|e| e.to_string()).collect::<Vec<_>>().join("+")
    }

    /// Hex SHA-256 of the JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        Sha256::digest(&json).iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn embed_dim(&self) -> usize {
        EMBED_DIM.div_ceil(self.width_divisor)
    }

    fn width(&self, w: usize) -> usize {
        w.div_ceil(self.width_divisor)
    }

    /// Layer stack for one encoder.
    pub fn encoder_layers(&self, kind: EncoderKind) -> Vec<LayerSpec> {
        let bn = LayerSpec::batch_norm;
        match kind {
            EncoderKind::Cnn => {
                let drop = || LayerSpec::Dropout { p: self.dropout_image };
                vec![
                    LayerSpec::conv(self.width(8), 11),
                    bn(),
                    LayerSpec::Relu,
                    LayerSpec::MaxPool,
                    drop(),
                    LayerSpec::conv(self.width(16), 5),
                    bn(),
                    LayerSpec::Relu,
                    LayerSpec::MaxPool,
                    drop(),
                    LayerSpec::conv(self.width(32), 3),
                    bn(),
                    LayerSpec::Relu,
                    LayerSpec::MaxPool,
                    drop(),
                    LayerSpec::Flatten,
                    LayerSpec::Dense { out: self.embed_dim() },
                ]
            }
            EncoderKind::Lstm => {
                let drop = || LayerSpec::Dropout { p: self.dropout_sequence };
                vec![
                    LayerSpec::Lstm { hidden: self.width(75), return_sequences: true },
                    drop(),
                    bn(),
                    LayerSpec::Lstm { hidden: self.width(55), return_sequences: false },
                    drop(),
                    bn(),
                    LayerSpec::Dense { out: self.width(50) },
                    drop(),
                    bn(),
                    LayerSpec::Dense { out: self.embed_dim() },
                ]
            }
        }
    }
}
