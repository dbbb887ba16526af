//! Configuration, command dispatch and CSV output for the `rbergomi` binary.

mod commands;
pub mod config;
pub mod csv;

pub use commands::{execute, run, Output};
pub use config::{parse_args, parse_config, Command, Invocation, RunConfig};
pub use csv::{emit_csv, format_float};
