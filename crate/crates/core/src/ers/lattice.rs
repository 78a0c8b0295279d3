use crate::error::{Error, Result};
use crate::hsi::PcaProjection;

/// Smallest edge weight kept on the lattice. Weights that underflow are
/// clamped here so every lattice edge stays strictly positive.
pub const MIN_WEIGHT: f64 = f64::MIN_POSITIVE;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Connectivity {
    Four,
    #[default]
    Eight,
}

impl Connectivity {
    /// Forward offsets `(drow, dcol)`; each unordered pair is visited once.
    fn forward_offsets(self) -> &'static [(isize, isize)] {
        match self {
            Connectivity::Four => &[(0, 1), (1, 0)],
            Connectivity::Eight => &[(0, 1), (1, -1), (1, 0), (1, 1)],
        }
    }

    pub fn max_degree(self) -> usize {
        match self {
            Connectivity::Four => 4,
            Connectivity::Eight => 8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatticeEdge {
    /// Smaller endpoint.
    pub a: usize,
    pub b: usize,
    pub weight: f64,
}

/// Weighted pixel-adjacency graph used by the superpixel objective.
#[derive(Debug, Clone)]
pub struct LatticeGraph {
    height: usize,
    width: usize,
    edges: Vec<LatticeEdge>,
    strength: Vec<f64>,
    total_strength: f64,
    mu: Vec<f64>,
}

impl LatticeGraph {
    /// Builds the graph from an explicit undirected edge list over a
    /// `height x width` lattice. Edge ids are positions in `edges`.
    pub fn from_edges(height: usize, width: usize, edges: Vec<LatticeEdge>) -> Result<Self> {
        let n = height * width;
        if n < 2 {
            return Err(Error::param("lattice needs at least two pixels"));
        }
        let mut strength = vec![0.0; n];
        for (k, e) in edges.iter().enumerate() {
            if e.a >= e.b || e.b >= n {
                return Err(Error::param(format!("edge {k} ({}, {}) is invalid", e.a, e.b)));
            }
            if !(e.weight > 0.0 && e.weight <= 1.0) {
                return Err(Error::param(format!(
                    "edge {k} weight {} outside (0, 1]",
                    e.weight
                )));
            }
            strength[e.a] += e.weight;
            strength[e.b] += e.weight;
        }
        let total_strength: f64 = strength.iter().sum();
        if total_strength <= 0.0 {
            return Err(Error::param("lattice has no edges"));
        }
        let mu = strength.iter().map(|w| w / total_strength).collect();
        Ok(Self {
            height,
            width,
            edges,
            strength,
            total_strength,
            mu,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn n_nodes(&self) -> usize {
        self.height * self.width
    }

    pub fn edges(&self) -> &[LatticeEdge] {
        &self.edges
    }

    /// Node strengths `w_i`, the summed weight of incident edges.
    pub fn strength(&self) -> &[f64] {
        &self.strength
    }

    pub fn total_strength(&self) -> f64 {
        self.total_strength
    }

    /// Stationary distribution of the random walk on the full lattice.
    pub fn mu(&self) -> &[f64] {
        &self.mu
    }
}

/// Builds the pixel lattice over `features` (one feature vector per pixel).
///
/// Adjacent pixels `i`, `j` get weight
/// `exp(-(|l_i - l_j|^2 * |x_i - x_j|^2) / (2 sigma^2))`, where `l` is the
/// `(row, col)` position and `x` the feature vector, clamped below at
/// [`MIN_WEIGHT`].
pub fn build_lattice(
    features: &PcaProjection,
    sigma: f64,
    connectivity: Connectivity,
) -> Result<LatticeGraph> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::param(format!("lattice sigma must be > 0, got {sigma}")));
    }
    let (h, w) = (features.height(), features.width());
    if h * w < 2 {
        return Err(Error::param("lattice needs at least two pixels"));
    }
    let two_sigma_sq = 2.0 * sigma * sigma;
    let mut edges = Vec::with_capacity(h * w * connectivity.forward_offsets().len());
    for r in 0..h {
        for c in 0..w {
            let i = r * w + c;
            for &(dr, dc) in connectivity.forward_offsets() {
                let (nr, nc) = (r as isize + dr, c as isize + dc);
                if nr < 0 || nc < 0 || nr as usize >= h || nc as usize >= w {
                    continue;
                }
                let j = nr as usize * w + nc as usize;
                let spatial = (dr * dr + dc * dc) as f64;
                let feat: f64 = features
                    .row(i)
                    .iter()
                    .zip(features.row(j))
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
                let weight = (-(spatial * feat) / two_sigma_sq).exp().max(MIN_WEIGHT);
                let (a, b) = if i < j { (i, j) } else { (j, i) };
                edges.push(LatticeEdge { a, b, weight });
            }
        }
    }
    LatticeGraph::from_edges(h, w, edges)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn features(h: usize, w: usize, scores: Vec<f64>) -> PcaProjection {
        let k = scores.len() / (h * w);
        PcaProjection::from_scores(h, w, k, scores).unwrap()
    }

    #[test]
    fn identical_neighbors_weight_one() {
        let g = build_lattice(&features(1, 2, vec![3.0, 3.0]), 5.0, Connectivity::Eight).unwrap();
        assert_eq!(g.edges().len(), 1);
        assert_eq!(g.edges()[0].weight, 1.0);
    }

    #[test]
    fn horizontal_pair_weight() {
        // feature distance^2 = 50, spatial distance^2 = 1, sigma = 5
        let g = build_lattice(
            &features(1, 2, vec![0.0, 0.0, 0.0, 5.0, 5.0, 0.0]),
            5.0,
            Connectivity::Eight,
        )
        .unwrap();
        assert!((g.edges()[0].weight - (-1.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn two_by_two_uniform() {
        let g = build_lattice(&features(2, 2, vec![1.0; 4]), 5.0, Connectivity::Eight).unwrap();
        assert_eq!(g.edges().len(), 6);
        assert!(g.edges().iter().all(|e| e.weight == 1.0));
        for &m in g.mu() {
            assert!((m - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn degree_bounded_by_connectivity() {
        let g = build_lattice(&features(4, 5, (0..20).map(f64::from).collect()), 5.0, Connectivity::Eight)
            .unwrap();
        let mut degree = vec![0; 20];
        for e in g.edges() {
            degree[e.a] += 1;
            degree[e.b] += 1;
            assert!(e.a < e.b && e.weight > 0.0 && e.weight <= 1.0);
        }
        assert_eq!(degree.iter().max(), Some(&8));
        assert_eq!(degree[0], 3);
        assert!((g.mu().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn underflow_is_clamped() {
        let g = build_lattice(&features(1, 2, vec![0.0, 1e6]), 5.0, Connectivity::Four).unwrap();
        assert_eq!(g.edges()[0].weight, MIN_WEIGHT);
    }

    #[test]
    fn single_pixel_rejected() {
        assert!(build_lattice(&features(1, 1, vec![0.0]), 5.0, Connectivity::Eight).is_err());
    }
}
