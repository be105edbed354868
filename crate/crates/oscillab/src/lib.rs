//! Command-line front end for `oscillab-core`: TOML experiment configs in, CSV and
//! JSON artifacts out.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod output;
pub mod run;

pub use config::{parse_config, Command, ExperimentConfig};
pub use error::CliError;
pub use run::{run_experiment, RunOptions, RunOutcome};
