//! Experiment orchestration: configuration, seeded sweeps, aggregation and
//! the validation suites.

pub mod config;
pub mod stats;
pub mod sweep;
pub mod validate;

pub use config::{parse_config, ExperimentSpec};
pub use sweep::{
    percent_reduction, run_sweep, AggregateRow, ResultRow, SweepResult, AGGREGATE_HEADER, RAW_HEADER,
};
pub use validate::{validate, SuiteReport, ValidateOptions};
