//! Configuration-driven experiments for the `diracgb` solvers.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod experiment;

pub use config::{parse, serialize, Compare, Example, ExperimentConfig, Method};
pub use error::{HarnessError, Result};
pub use experiment::{run_experiment, RunSummary};
