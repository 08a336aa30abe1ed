//! Library side of the `sparsect` command-line tool: argument definitions,
//! subcommand drivers, PGM export, run manifests and the canned experiments.

pub mod args;
pub mod commands;
mod error;
pub mod experiment;
pub mod manifest;
pub mod pgm;

pub use args::Cli;
pub use commands::run;
pub use error::{CliError, CliResult};
