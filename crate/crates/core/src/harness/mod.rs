//! Evaluation protocol, pipeline orchestration, model bundles and reports.

mod bundle;
mod config;
mod metrics;
mod pipeline;
mod protocol;
mod report;
pub mod synth;

pub use bundle::{BundleSeeds, ModelBundle, BUNDLE_FORMAT, BUNDLE_MANIFEST, BUNDLE_VERSION, FUSION_FILE};
pub use config::{PipelineConfig, PRESETS};
pub use metrics::{detection_metrics, f_measure, DetectionCounts, DetectionMetrics};
pub use pipeline::{
    evaluate_indices, load_sample_inputs, prepare_inputs, run_cross_dataset, run_crossval, run_evaluation, run_training,
    score_inputs, train_bundle, Evaluation, NetRole, SampleInputs, SPLIT_SEED_OFFSET,
};
pub use protocol::{fold_plan_from_manifest, make_folds, make_folds_for_labels, make_splits, split_sizes, FoldPlan, SplitPlan, MIN_SPLIT_SAMPLES};
pub use report::{emit_report, mean, parse_csv, render_csv, render_markdown, render_report, CrossCell, FoldResult, ReportFormat, RunReport};

use crate::convnet::NetError;
use crate::fusion::FusionError;
use crate::imagecore::{ImageError, ManifestError};

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("{0}")]
    Protocol(String),
    #[error("metrics: {0}")]
    Metrics(String),
    #[error("config: {0}")]
    Config(String),
    #[error("{stage} failed{}: {message}", sample.as_ref().map(|s| format!(" for sample {s}")).unwrap_or_default())]
    Stage { stage: String, sample: Option<String>, message: String },
    #[error("model bundle: {0}")]
    Bundle(String),
    #[error("report: {0}")]
    Report(String),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Fusion(#[from] FusionError),
    #[error(transparent)]
    Image(#[from] ImageError),
    #[error(transparent)]
    Manifest(#[from] ManifestError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
