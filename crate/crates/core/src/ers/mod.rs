//! Entropy-rate superpixel segmentation.
//!
//! The lattice graph joins adjacent pixels with Gaussian weights on their
//! feature distance. Starting from the empty edge set, edges are added
//! greedily to maximize `H(A) + alpha * B(A)` (entropy rate of a random walk
//! on the chosen edges plus a component-size balance term) while keeping the
//! edge set a forest, until the requested number of components remains. Both
//! terms are submodular, so a lazily re-evaluated priority queue picks the
//! same edges as a full rescan.

mod greedy;
mod lattice;
mod map;
mod objective;

pub use greedy::{
    balancing_alpha, greedy_segment, grow_forest, BALANCE_SHARE, GreedyForest, GreedyStep, GreedyStrategy,
};
pub use lattice::{build_lattice, Connectivity, LatticeEdge, LatticeGraph, MIN_WEIGHT};
pub use map::SuperpixelMap;
pub use objective::{balance_term, entropy_rate};
