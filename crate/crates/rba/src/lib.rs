//! Covariate-shift experiments for robust bias-aware classifiers: CSV/JSON
//! IO, bias samplers, pinned synthetic scenarios and the experiment runner
//! behind the `rba` command-line tool.

pub mod bias;
pub mod cli;
pub mod error;
pub mod experiment;
pub mod io;
pub mod methods;
pub mod scenarios;
pub mod stats;

pub use rba_core;

pub use error::{Error, Result};
pub use experiment::{run_experiment, ExperimentConfig, ExperimentReport};
