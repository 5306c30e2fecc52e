use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("layer {layer}: expected input shape {expected}, got {got:?}")]
    ShapeMismatch { layer: usize, expected: String, got: Vec<usize> },
    #[error("backward requires a tape recorded in train mode")]
    EvalTape,
    #[error("inputs do not match the encoders: {0}")]
    ModalityMismatch(String),
    #[error("not enough windows to sample pairs: {0}")]
    InsufficientWindows(String),
    #[error("non-finite loss in epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Core(#[from] physiogait_core::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
