//! Experiment plumbing behind the `dpd` command-line tool.

pub mod error;
pub mod experiments;
pub mod output;

pub use error::{CliError, CliResult};
