//! Experiment harness for the `markov-vi` solvers: TOML configs, a
//! plain-text MDP format, parallel solver matrices and CSV reports.

pub mod config;
pub mod error;
pub mod harness;
pub mod mdp_io;
pub mod report;

pub use config::{ExperimentConfig, Metric, Overrides};
pub use error::{BenchError, Result};
pub use harness::{run_experiment, write_outputs, ExperimentOutput, RunOptions, RunRecord};
