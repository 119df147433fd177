//! Command-line front end and run-log analysis.

pub mod analysis;
pub mod commands;

pub use commands::{execute, Cli, CliError};
