//! Cross-validation, metrics, simplex ensembling and Shapley attribution.

pub mod cv;
pub mod ensemble;
pub mod folds;
pub mod metrics;
pub mod shapley;

pub use cv::{fit_final, run_cv, run_fold, CvConfig, CvResult, FinalModel, FoldArtifacts, ShapleyConfig, ShapleySetting};
pub use ensemble::{fit_ensemble_weights, EnsembleWeights};
pub use folds::{kfold_split, FoldAssignment};
pub use metrics::{compute_metrics, MetricSet};
pub use shapley::{shapley_importance, ShapleyAttribution, ShapleyMode};
