//! Command-line front end: experiment configuration, binary image and
//! measurement files, and the subcommands of the `brt` tool.

pub mod benchmark;
pub mod commands;
pub mod config;
pub mod error;
pub mod io;

pub use benchmark::{run_benchmark, BenchReport, BenchRow};
pub use config::ExperimentConfig;
pub use error::CliError;
