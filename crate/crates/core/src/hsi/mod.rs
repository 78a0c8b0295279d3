//! Cube data model, file formats, PCA, and synthetic scenes.

mod cube;
mod io;
mod pca;
mod synth;

pub use cube::{GroundTruth, HsiCube};
pub use io::{
    decode_cube, encode_cube, load_cube, load_labels, load_labels_for, save_cube, CubeFormat,
};
pub use pca::{pca_project, PcaProjection};
pub(crate) use pca::orient;
pub use synth::{synth_cube, Patch, SceneSpec};
