//! Library surface of the experiment driver. Commands are plain functions of
//! (config, input files); the binary in `main.rs` only parses arguments and
//! maps errors to exit codes.

pub mod commands;
pub mod config;
pub mod csvio;
pub mod error;
pub mod spfd;
pub mod svg;

pub use config::ExperimentConfig;
pub use error::{exit_code, CliError};

pub type Result<T> = std::result::Result<T, CliError>;
