//! Experiment orchestration: configuration, seeded end-to-end runs, sweeps,
//! the convergence-bound monitor, and deterministic report emission.

mod commcost;
mod config;
mod experiment;
mod monitor;
mod report;
mod sweep;

pub use commcost::{commcost_report, commcost_table, CommCostRow};
pub use config::{Architecture, ExperimentConfig, TaskChoice, OUTPUT_DIR_ENV};
pub use experiment::{
    median, run_experiment, run_single_seed, ExperimentResult, RoundRecord, SeedRun,
};
pub use monitor::{theorem1_monitor, BoundReport, MonitorVerdict};
pub use report::{round_csv, summary_text, write_experiment_outputs, CSV_HEADER};
pub use sweep::{config_for_value, sweep, sweep_table_csv, SweepAxis, SweepCell};
