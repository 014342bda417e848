//! Command-line front end of `icas-sig`: TOML run configuration, the cube
//! file format and CSV exports.

pub mod app;
pub mod commands;
pub mod config;
pub mod cube;
pub mod error;
pub mod output;

pub use config::RunConfig;
pub use error::{CliError, CliResult};
