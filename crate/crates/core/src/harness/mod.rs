//! Configuration, experiment pipelines, Monte Carlo driver and CSV output.

pub mod config;
pub mod experiment;
pub mod report;

pub use config::{ExperimentConfig, Mode, TransitionSpec};
pub use experiment::{execute, monte_carlo, run_experiment, run_monte_carlo, MonteCarloSummary, RunOutput};
pub use report::export_csv;
