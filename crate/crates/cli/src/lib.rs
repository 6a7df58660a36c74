//! Batch pipeline around the `cmbrbg` library: configuration, file-based
//! stages and the reports printed by the `cmbrbg` binary.

pub mod config;
pub mod pipeline;

pub use config::RunConfig;
