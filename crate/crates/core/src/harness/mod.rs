//! Repeated experiments: dataset generation, training, evaluation of every
//! method on every model, and the aggregated report.

mod config;
mod report;
mod run;

pub use config::{
    derive_seed, DatasetKind, DatasetSpec, ExperimentConfig, RepeatSeeds, SweepConfig, TuneConfig,
};
pub use report::{results_tsv, summary_tsv, Entry, ReportRow, ReportTable, REPORT_HEADER, RESULTS_HEADER};
pub use run::{
    grid_search_alpha_beta, run_cell, run_experiment, select_best, sweep_sample_size, train_log_tsv,
    AccuracyResult, CellResult, CellStatus, ExperimentResult, GridPoint, GridResult, SweepPoint,
};
