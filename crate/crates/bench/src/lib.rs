//! Experiment orchestration for KG-augmented node classification:
//! dataset preparation, repeated-seed runs, ablation suites, replay
//! fixtures and the `demograph` command line.

pub mod ablation;
pub mod config;
pub mod dataset;
pub mod error;
pub mod experiment;
pub mod fixtures;
pub mod metrics;
pub mod pipeline;

pub use ablation::{run_ablation, suite_configs, varied_fields, Suite, SuiteEntry};
pub use config::load_config;
pub use dataset::{load_linqs, prepare_dataset, standard_splits, DatasetName, SplitSizes};
pub use error::BenchError;
pub use experiment::{run_experiment, ExperimentConfig, MergeSettings, Report, RunRecord};
pub use metrics::{compute_metrics, Metrics};
