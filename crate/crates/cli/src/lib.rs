//! Configuration-driven front end for `hodograph-core`: field solves, blow-up
//! scans, periodicity reports and oracle comparisons, emitted as CSV.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

pub use commands::{run, Command, Status};
pub use config::RunConfig;
pub use error::CliError;
pub use output::{Output, Table};
