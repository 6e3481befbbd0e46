//! Configuration parsing and command dispatch for the `nvpes` binary.

pub mod config;
pub mod run;

pub use config::{parse_config, Command, ConfigError, Format, RunConfig};
pub use run::{run, Outcome, RunError, RunOptions};
