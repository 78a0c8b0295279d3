//! Accuracy metrics under optimal cluster-to-class matching, and the
//! hyperparameter sweep.

mod hungarian;
mod metrics;
mod sweep;

pub use hungarian::max_weight_assignment;
pub use metrics::{
    align_confusion, align_labels, evaluate, metrics, Alignment, ConfusionMatrix, MetricsReport,
};
pub use sweep::{config_key, sweep, SweepGrid, SweepReport, SweepRow};
