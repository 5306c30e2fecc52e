//! Multi-modal Siamese re-identification network.
//!
//! Each configured encoder maps one modality of a gesture window to a 40-dim
//! vector; the concatenation is the common embedding `eta`. Training pairs
//! two windows, pushes embeddings of the same wearer and gesture together and
//! others at least `margin` apart, and jointly trains a softmax identity head
//! on each branch's embedding.

mod checkpoint;
mod config;
mod input;
mod model;
mod pairs;

pub use checkpoint::CHECKPOINT_KIND;
pub use config::{EncoderConfig, EncoderKind, ExperimentConfig, Modality, SeqNorm, EMBED_DIM};
pub use input::{ModalityInput, Sample, IMAGE_SHAPE};
pub use model::{Encoder, Mmsnn, PairObjective};
pub use pairs::{make_pairs, TrainingPair};
