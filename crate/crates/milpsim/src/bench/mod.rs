//! Validation studies and their reporting machinery.

pub mod experiments;
pub mod parallel;
pub mod report;
pub mod stats;

pub use experiments::{
    build_shallow_store, compare_baselines, correlation_experiment, prediction_accuracy,
    record_search_results, AccuracyOutcome, BaselineOutcome, BenchError, CorrelationOutcome,
    MethodSummary, ShallowScaling, METHOD_NAMES, WIN_TOL,
};
pub use parallel::parallel_map;
pub use report::{cell, ExperimentReport};
pub use stats::{confidence95, mean, pearson_r, StatsError};
