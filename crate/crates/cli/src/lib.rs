//! Pipeline commands behind the `serpent` binary: corpus ingest, feature
//! extraction, training, reporting, prediction and diarization.

pub mod commands;
pub mod config;
mod fsutil;

pub use config::{Overrides, PipelineConfig};
