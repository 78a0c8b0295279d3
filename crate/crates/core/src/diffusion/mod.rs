//! Window-restricted kNN graph over representatives, the random walk on it,
//! and diffusion distances.

mod chain;
mod graph;
mod lanczos;

pub use chain::{
    dyadic_grid, markov_chain, time_grid, time_horizon, DiffusionEmbedding, MarkovChain,
    EIGEN_TOL,
};
pub use graph::{build_spatial_knn, SpatialKnnGraph};
