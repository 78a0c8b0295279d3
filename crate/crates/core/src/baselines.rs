//! Reference clusterers without spatial information: K-Means and density
//! peak clustering on raw spectra.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cluster::{dt_scores, propagate_labels, select_modes, Sigma0};
use crate::density::{kde, knn_index, sigma0_at_percentile};
use crate::diffusion::DiffusionEmbedding;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BaselineMethod {
    KMeans,
    Dpc,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BaselineConfig {
    pub method: BaselineMethod,
    pub clusters: usize,
    /// K-Means start point.
    pub seed: u64,
    /// DPC density estimate.
    pub k_n: usize,
    pub sigma0: Sigma0,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self {
            method: BaselineMethod::KMeans,
            clusters: 2,
            seed: 0,
            k_n: 30,
            sigma0: Sigma0::Percentile(50.0),
        }
    }
}

/// Runs the configured baseline; labels are `1..=K` per point.
pub fn run_baseline(points: &[f64], dim: usize, config: &BaselineConfig) -> Result<Vec<u32>> {
    match config.method {
        BaselineMethod::KMeans => Ok(kmeans(points, dim, config.clusters, config.seed, 300)?.labels),
        BaselineMethod::Dpc => dpc(points, dim, config.clusters, config.k_n, config.sigma0),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansResult {
    /// `1..=K` per point.
    pub labels: Vec<u32>,
    /// Row-major `K x dim`.
    pub centers: Vec<f64>,
    /// Sum of squared distances to the assigned center after each
    /// assignment step.
    pub objective: Vec<f64>,
    pub iterations: usize,
}

fn sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn check_points(points: &[f64], dim: usize, k: usize) -> Result<usize> {
    if dim == 0 || points.len() % dim != 0 {
        return Err(Error::Dimension(format!(
            "{} values do not split into points of dimension {dim}",
            points.len()
        )));
    }
    let n = points.len() / dim;
    if k == 0 || k > n {
        return Err(Error::param(format!("cluster count must be in 1..={n}, got {k}")));
    }
    Ok(n)
}

/// Nearest center (ties: smallest center index) and its squared distance.
fn nearest(p: &[f64], centers: &[f64], dim: usize) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, center) in centers.chunks(dim).enumerate() {
        let d = sq(p, center);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

/// Restarts of [`kmeans`]; the run with the lowest final objective wins.
pub const KMEANS_RESTARTS: usize = 10;

/// Lloyd's algorithm, restarted [`KMEANS_RESTARTS`] times from k-means++
/// seeds drawn from one seeded stream; keeps the run with the lowest final
/// objective (ties: earliest). Each run iterates to an assignment fixpoint
/// or `max_iter`. A center left without points is moved to the point
/// farthest from its own center.
pub fn kmeans(points: &[f64], dim: usize, k: usize, seed: u64, max_iter: usize) -> Result<KMeansResult> {
    let n = check_points(points, dim, k)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<KMeansResult> = None;
    for _ in 0..KMEANS_RESTARTS {
        let centers = plus_plus_seeds(points, dim, n, k, &mut rng);
        let run = lloyd(points, dim, n, centers, max_iter);
        let better = best
            .as_ref()
            .is_none_or(|b| run.objective.last() < b.objective.last());
        if better {
            best = Some(run);
        }
    }
    Ok(best.expect("at least one restart"))
}

/// D^2 sampling: each new center is drawn with probability proportional to
/// the squared distance to the closest center so far.
fn plus_plus_seeds(points: &[f64], dim: usize, n: usize, k: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let pt = |i: usize| &points[i * dim..(i + 1) * dim];
    let first = rng.random_range(0..n);
    let mut centers = pt(first).to_vec();
    let mut gap: Vec<f64> = (0..n).map(|i| sq(pt(i), pt(first))).collect();
    for _ in 1..k {
        let total: f64 = gap.iter().sum();
        let next = if total > 0.0 {
            let mut u = rng.random::<f64>() * total;
            let mut pick = n - 1;
            for (i, g) in gap.iter().enumerate() {
                if u < *g {
                    pick = i;
                    break;
                }
                u -= g;
            }
            pick
        } else {
            rng.random_range(0..n)
        };
        centers.extend_from_slice(pt(next));
        for i in 0..n {
            gap[i] = gap[i].min(sq(pt(i), pt(next)));
        }
    }
    centers
}

fn lloyd(points: &[f64], dim: usize, n: usize, mut centers: Vec<f64>, max_iter: usize) -> KMeansResult {
    let pt = |i: usize| &points[i * dim..(i + 1) * dim];
    let k = centers.len() / dim;
    let assign = |centers: &[f64]| -> (Vec<usize>, Vec<f64>) {
        (0..n).map(|i| nearest(pt(i), centers, dim)).unzip()
    };
    let (mut owner, mut dist) = assign(&centers);
    let mut objective = vec![dist.iter().sum::<f64>()];
    let mut iterations = 0;
    while iterations < max_iter {
        iterations += 1;
        let mut sums = vec![0.0; k * dim];
        let mut counts = vec![0usize; k];
        for i in 0..n {
            counts[owner[i]] += 1;
            for (s, v) in sums[owner[i] * dim..].iter_mut().zip(pt(i)) {
                *s += v;
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                for d in 0..dim {
                    centers[c * dim + d] = sums[c * dim + d] / counts[c] as f64;
                }
            } else {
                let mut far = 0;
                for i in 1..n {
                    if dist[i] > dist[far] {
                        far = i;
                    }
                }
                centers[c * dim..(c + 1) * dim].copy_from_slice(pt(far));
                dist[far] = 0.0;
            }
        }
        let (next, next_dist) = assign(&centers);
        objective.push(next_dist.iter().sum());
        let changed = next != owner;
        owner = next;
        dist = next_dist;
        if !changed {
            break;
        }
    }
    KMeansResult {
        labels: owner.iter().map(|&c| c as u32 + 1).collect(),
        centers,
        objective,
        iterations,
    }
}

/// Density peak clustering in Euclidean distance. Density is the same
/// nearest-neighbor kernel estimate the main pipeline uses; modes are the
/// top-`k` of density times distance to the nearest point of no lower
/// density; the rest inherit labels in decreasing density from their
/// nearest labeled point of no lower density. Tie rules match the
/// pipeline's. Quadratic in the number of points.
pub fn dpc(points: &[f64], dim: usize, k: usize, k_n: usize, sigma0: Sigma0) -> Result<Vec<u32>> {
    let n = check_points(points, dim, k)?;
    let rho = if n < 2 {
        vec![1.0; n]
    } else {
        let table = knn_index(points, dim, k_n.min(n - 1))?;
        let s = match sigma0 {
            Sigma0::Value(s) => s,
            Sigma0::Percentile(p) => sigma0_at_percentile(&table, p)?,
        };
        kde(&table, s)?.zeta().to_vec()
    };
    let euclid = DiffusionEmbedding::from_coordinates(0.0, dim, points.to_vec())?;
    let delta = dt_scores(&euclid, &rho)?;
    let modes = select_modes(delta, &rho, k)?.modes;
    let mut partial = vec![0u32; n];
    for (r, &m) in modes.iter().enumerate() {
        partial[m] = r as u32 + 1;
    }
    propagate_labels(&partial, &euclid, &rho)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn blobs() -> Vec<f64> {
        // two tight jittered groups of 2-D points far apart
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut v = Vec::new();
        for c in [0.0, 10.0] {
            for _ in 0..10 {
                v.push(c + rng.random_range(-0.1..0.1));
                v.push(c + rng.random_range(-0.1..0.1));
            }
        }
        v
    }

    #[test]
    fn single_cluster_center_is_mean() {
        let pts = [1.0, 2.0, 6.0];
        let r = kmeans(&pts, 1, 1, 7, 300).unwrap();
        assert_eq!(r.labels, vec![1, 1, 1]);
        assert_eq!(r.centers, vec![3.0]);
    }

    #[test]
    fn kmeans_separates_blobs_for_any_seed() {
        let pts = blobs();
        for seed in 0..5 {
            let l = kmeans(&pts, 2, 2, seed, 300).unwrap().labels;
            assert!(l[..10].iter().all(|&x| x == l[0]));
            assert!(l[10..].iter().all(|&x| x == l[10]));
            assert_ne!(l[0], l[10]);
        }
    }

    #[test]
    fn kmeans_is_deterministic_per_seed() {
        let pts = blobs();
        assert_eq!(kmeans(&pts, 2, 3, 4, 300).unwrap(), kmeans(&pts, 2, 3, 4, 300).unwrap());
    }

    #[test]
    fn dpc_separates_blobs() {
        let l = dpc(&blobs(), 2, 2, 4, Sigma0::Percentile(50.0)).unwrap();
        assert!(l[..10].iter().all(|&x| x == l[0]));
        assert!(l[10..].iter().all(|&x| x == l[10]));
        assert_ne!(l[0], l[10]);
    }

    #[test]
    fn dpc_identical_points() {
        let l = dpc(&[0.5; 6], 1, 2, 2, Sigma0::Percentile(50.0)).unwrap();
        // modes are points 0 and 1; everyone else joins the first
        assert_eq!(l, vec![1, 2, 1, 1, 1, 1]);
    }

    #[test]
    fn rejects_too_many_clusters() {
        assert!(kmeans(&[1.0, 2.0], 1, 3, 0, 10).is_err());
        assert!(dpc(&[1.0, 2.0], 1, 0, 1, Sigma0::Value(1.0)).is_err());
    }
}
