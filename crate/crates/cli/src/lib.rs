//! File formats and subcommand implementations behind the `focalsplit` binary.

pub mod app;
pub mod io;

pub use app::{run, Cli, CliError};
