//! Experiment runner: epochs-to-threshold and accuracy comparisons between
//! a fixed rate and `1/L`, the quadratic bound suite, and output writers.

pub mod bound;
pub mod config;
pub mod output;
pub mod train;

pub use bound::{min_iterations_bound, run_bound_check, BoundCheckReport, Quadratic};
pub use config::{DataSource, ExperimentConfig, FirstEpoch, LrPolicy, RegConfig, Recompute, MAX_ITERATIONS};
pub use train::{
    initial_params, oscillation_probe, prepare, run_accuracy_experiment, run_threshold_experiment, train,
    train_with_observer, CompareMode, CompareOptions, EpochMetrics, PairedReport, Prepared, ProbeReport,
    TrainReport,
};
