//! Pipeline orchestration for squeeze3d: every CLI verb as a library
//! function, plus configuration, run manifests and error classification.

pub mod commands;
pub mod config;
pub mod error;
pub mod manifest;

pub use commands::Context;
pub use config::PipelineConfig;
pub use error::CliError;
