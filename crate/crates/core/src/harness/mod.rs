//! Config files, single runs with metrics CSVs, and parameter sweeps.

pub mod config;
pub mod experiment;
pub mod sweep;

pub use config::{AlgoKind, ExperimentConfig, LossKind, ScheduleKind, SyntheticSpec};
pub use experiment::{
    build_problem, run_experiment, start_point, write_metrics_csv, RunOutcome, CSV_HEADER,
};
pub use sweep::{sweep, SweepPoint, SweepSummary};
