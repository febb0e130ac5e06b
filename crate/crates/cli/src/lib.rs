//! Config-driven experiment runner for `silofed-core`: parameter sweeps
//! over methods, privacy budgets, regularization strengths and seeds, with
//! results written as CSV.

pub mod config;
pub mod error;
pub mod results;
pub mod summary;
pub mod sweep;

pub use config::{parse_config, parse_config_str, Experiment};
pub use error::CliError;
pub use sweep::{run_experiment, RunSettings, SweepOutcome};
