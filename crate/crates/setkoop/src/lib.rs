//! Scenario runner for the set-valued Koopman toolkit: TOML scenarios, a
//! registry of named checks and CSV reports.
// `!(a < b)` is used on purpose so that NaN inputs are rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod checks;
pub mod config;
pub mod formats;
pub mod registry;
pub mod runner;

pub use config::{ConfigError, Scenario, Setup};
pub use registry::{CheckInfo, CHECKS};
pub use runner::{run_path, run_scenario, RunError, RunOptions, RunReport, Status};
