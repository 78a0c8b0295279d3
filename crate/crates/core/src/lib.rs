//! Spatial-spectral diffusion clustering for hyperspectral images.
//!
//! The guide in `book/` walks through each stage; its examples run as
//! doc-tests through the `book` module below.

pub mod baselines;
pub mod cluster;
pub mod density;
pub mod diffusion;
pub mod error;
pub mod eval;
pub mod ers;
pub mod hsi;
pub mod raster;
pub mod unionfind;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/data.md")]
    mod data {}
    #[doc = include_str!("../../../book/src/superpixels.md")]
    mod superpixels {}
    #[doc = include_str!("../../../book/src/density.md")]
    mod density {}
    #[doc = include_str!("../../../book/src/diffusion.md")]
    mod diffusion {}
    #[doc = include_str!("../../../book/src/clustering.md")]
    mod clustering {}
    #[doc = include_str!("../../../book/src/evaluation.md")]
    mod evaluation {}
    #[doc = include_str!("../../../book/src/baselines.md")]
    mod baselines {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
