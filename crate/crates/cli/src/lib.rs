//! Configuration, orchestration and file formats behind the `isf` binary.

pub mod config;
pub mod error;
pub mod io;
pub mod pipeline;
pub mod presets;

pub use config::{parse_config, parse_with_overrides, RunConfig};
pub use error::CliError;
