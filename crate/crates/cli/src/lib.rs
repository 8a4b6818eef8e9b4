//! Command-line front end for the `robust-sparse` library: instance
//! generation, estimator runs, Monte-Carlo benchmark suites and
//! concentration sweeps, with CSV, JSON and SVG outputs.

pub mod args;
pub mod bench;
pub mod config;
pub mod error;
pub mod plot;
pub mod run;

pub use config::ExperimentConfig;
pub use error::CliError;
pub use run::{run, Outcome};
