pub mod actions;
pub mod checkpoint;
pub mod classifier;
pub mod error;
pub mod features;
pub mod jsonl;
pub mod language;
pub mod metrics;
pub mod motion;
pub mod nn;
pub mod skeleton;
pub mod synth;
pub mod vq;

pub use error::{Error, Result};
