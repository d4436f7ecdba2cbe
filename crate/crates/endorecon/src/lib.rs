//! File formats, configuration and the reconstruction / evaluation commands
//! built on `endorecon-core`.

pub mod config;
pub mod dataset;
pub mod error;
pub mod evaluate;
pub mod formats;
pub mod pipeline;
pub mod synth;

pub use config::PipelineConfig;
pub use error::{Error, Result};
