//! Config-driven experiments, the topology ablation grid and exports.

mod ablation;
mod config;
mod export;
mod run;

pub use crate::engine::{evaluate, MetricSummary};
pub use ablation::{ablation_csv, run_ablation, topology_label, AblationRow, AblationSpec};
pub use config::{AlgorithmEntry, DataConfig, ExperimentConfig, DEFAULT_GAMMA};
pub use export::{export_heatmap, file_label, grid_csv, group_norm_means};
pub use run::{prepare_repeat, run_experiment, ExperimentOutcome, RepeatData, RepeatOutcome};
