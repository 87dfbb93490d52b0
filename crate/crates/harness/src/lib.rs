//! Experiment configuration, Monte Carlo runs, metrics and exports for
//! the `capa` command-line tool.

pub mod config;
pub mod error;
pub mod export;
pub mod metrics;
pub mod presets;
pub mod runner;

pub use config::{AttitudeSetting, DoaSource, ExperimentConfig, Method, Sweep, SweepVariable};
pub use error::{HarnessError, Result};
pub use runner::{run_trials, ExperimentResult, MetricRecord};
