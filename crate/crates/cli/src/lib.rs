//! Experiment runner for power-control equilibrium computations: config
//! loading, subcommands and result export.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

pub use config::{load_config, parse_config, ExperimentConfig};
pub use error::{CliError, CliResult};
