//! Library side of the `spdelab` binary: scenario loading, subcommands and output formats.

pub mod canned;
pub mod commands;
pub mod output;

pub use commands::{exit_code, ConfigError, Options};
