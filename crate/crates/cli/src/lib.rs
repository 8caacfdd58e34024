//! Experiment configuration, orchestration and reporting for the `svmc` tool.

pub mod config;
pub mod experiment;
pub mod report;

pub use config::{ConfigError, DataSource, ExperimentConfig};
pub use experiment::{run_experiment, run_sweep, ExperimentOutput, Summary};
