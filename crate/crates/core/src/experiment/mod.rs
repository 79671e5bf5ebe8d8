//! Experiment plumbing: configs, the training runner, metrics files and
//! the diagnostic commands behind the CLI.

mod config;
mod metrics;
mod prepare;
mod run;
mod summary;
mod tools;

pub use config::{
    load_config, parse_config, DatasetSpec, EvalSet, ExperimentConfig, GradcheckSection, Method, PartitionSpec,
    SweepPoint, MNIST_ENV, OUT_ENV,
};
pub use metrics::{read_metrics, write_metrics, MetricsRow, METRICS_COLUMNS};
pub use prepare::{prepare, Prepared};
pub use run::{build_partition, evaluate, full_gradient_norm_sq, run_experiment, run_seed, SeedRun};
pub use summary::{aggregate, PointSummary, Stat, Summary, SUMMARY_VERSION};
pub use tools::{boundcheck, cost_dry_run, gendata, gradcheck, BoundCheckFile, CostRow, ProblemSpec};
