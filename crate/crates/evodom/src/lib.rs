//! Configuration, file formats and subcommands of the `evodom` tool.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

pub use config::{parse_config, parse_config_str, preset_config, Resolved, RunConfig};
pub use error::{exit, CliError};
