//! Exact nearest neighbors, kernel density, and per-superpixel selection of
//! high-density representatives.

mod kde;
mod knn;
mod select;

pub use kde::{distance_percentiles, kde, sigma0_at_percentile, DensityField};
pub use knn::{knn_index, KnnTable};
pub(crate) use knn::sq_dist;
pub use select::{select_representatives, RepresentativeSet};
