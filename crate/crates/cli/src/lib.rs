//! Experiment runner for the `fedsim` simulator: config parsing, seed and
//! parameter sweeps, bound grids, validators, and CSV / JSON-lines output.

pub mod bounds;
pub mod error;
pub mod experiment;
pub mod spec;
pub mod validate;

pub use error::{CliError, CliResult};
pub use experiment::{run_experiment, ExperimentOutcome, RunSummary};
pub use spec::{parse_config, parse_config_with, ExperimentSpec, Overrides, PlannedRun};
