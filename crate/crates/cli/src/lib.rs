//! Library side of the `dmr` command-line tool.

pub mod commands;
pub mod error;
pub mod input;
pub mod report;
pub mod schema;

pub use error::{CliError, Result};
