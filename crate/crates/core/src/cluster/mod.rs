//! Mode selection in diffusion distance, label propagation, and the
//! end-to-end pipeline.

mod config;
mod modes;
mod pipeline;

pub use config::{S2dlConfig, Sigma0, TimeChoice};
pub use modes::{
    density_order, dt_scores, label_backbones, majority_vote, propagate_labels, select_modes,
    ModeDiagnostics,
};
pub use pipeline::{run_s2dl, ClusterMap, Prepared, Segmentation, Stages};
