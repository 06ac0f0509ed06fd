//! Configuration, scan orchestration and output for the `eit-localizer` tool.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

pub use commands::{resolve_jobs, run, Command, RunOptions, RunSummary};
pub use config::{load_config, parse_config, SimConfig};
pub use error::CliError;
