use std::sync::Arc;

use physiogait_core::rpimage::{encode_window, IMAGE_C, IMAGE_H, IMAGE_W};
use physiogait_core::stream::resample_to_len;
use physiogait_core::stats;

use super::config::{EncoderConfig, EncoderKind, SeqNorm};
use crate::error::{Error, Result};

pub const IMAGE_SHAPE: [usize; 3] = [IMAGE_C, IMAGE_H, IMAGE_W];

/// One encoder's input for one window.
#[derive(Clone, Debug, PartialEq)]
pub enum ModalityInput {
    /// Recurrence-plot image, `3 x 155 x 220` row-major.
    Image(Arc<Vec<f32>>),
    /// Time-major sequence `[steps, features]`.
    Sequence { features: usize, data: Arc<Vec<f32>> },
}

impl ModalityInput {
    /// Recurrence-plot image of one signal or of three axes.
    pub fn image(signals: &[&[f64]]) -> Result<Self> {
        let img = encode_window(signals)?;
        Ok(ModalityInput::Image(Arc::new(img.into_pixels().into_iter().map(|v| v as f32).collect())))
    }

    /// Each channel resampled to `len` steps and interleaved time-major. With
    /// [`SeqNorm::Window`] every channel is z-normalized on its own (a constant
    /// channel becomes zeros).
    pub fn sequence(channels: &[&[f64]], len: usize, norm: SeqNorm) -> Result<Self> {
        if channels.is_empty() || channels.iter().any(|c| c.is_empty()) {
            return Err(Error::ModalityMismatch("sequence input needs non-empty channels".into()));
        }
        let f = channels.len();
        let cols: Vec<Vec<f64>> = channels
            .iter()
            .map(|c| {
                let mut v = resample_to_len(c, len);
                if norm == SeqNorm::Window {
                    let m = stats::mean(&v);
                    let sd = stats::variance_pop(&v).sqrt();
                    v.iter_mut().for_each(|x| *x = if sd > 1e-12 { (*x - m) / sd } else { 0.0 });
                }
                v
            })
            .collect();
        let data = (0..len * f).map(|i| cols[i % f][i / f] as f32).collect();
        Ok(ModalityInput::Sequence { features: f, data: Arc::new(data) })
    }

    /// Whether this input can feed `enc` built with sequence length `seq_len`.
    pub fn matches(&self, enc: &EncoderConfig, seq_len: usize) -> bool {
        match (self, enc.kind) {
            (ModalityInput::Image(d), EncoderKind::Cnn) => d.len() == IMAGE_C * IMAGE_H * IMAGE_W,
            (ModalityInput::Sequence { features, data }, EncoderKind::Lstm) => {
                *features == enc.modality.features() && data.len() == seq_len * features
            }
            _ => false,
        }
    }
}

/// One labelled window with an input per encoder, in encoder order.
#[derive(Clone, Debug)]
pub struct Sample {
    /// Class index of the wearer.
    pub identity: usize,
    pub gesture: u8,
    pub inputs: Vec<ModalityInput>,
}
