//! Signal substrate for wearable re-identification: typed sensor streams, E4
//! ingestion, a synthetic cohort generator, gesture spotting, EDA
//! decomposition, derived cardio-respiratory channels and recurrence-plot
//! image encoding.

pub mod container;
pub mod error;
pub mod gesture;
pub mod ingest;
pub mod physio;
pub mod real;
pub mod rng;
pub mod rpimage;
pub mod scdecomp;
pub mod stats;
pub mod stream;
pub mod synthgen;
pub mod window;

pub use error::{Error, Result};
pub use ingest::Recording;
pub use real::Real;
pub use rng::Rng;
pub use rpimage::{RpImage, RpImage32, RpImage64};
pub use stream::{Channel, SensorStream};
pub use window::{GestureConfig, GestureWindow};
