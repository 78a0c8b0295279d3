use std::fmt::Write as _;

use super::graph::SpatialKnnGraph;
use super::lanczos::lanczos;
use crate::error::{Error, Result};
use crate::hsi::orient;

/// Convergence tolerance on Ritz residuals.
pub const EIGEN_TOL: f64 = 1e-10;

const LANCZOS_SEED: u64 = 0x5eed_1a4c;

/// Random walk on a graph with a self-loop added at every node.
///
/// With `W' = W + I` and degrees `d`, the transition matrix is
/// `P = D^-1 W'` and the stationary distribution `pi = d / sum(d)`. The
/// eigenpairs come from the symmetric matrix `D^-1/2 W' D^-1/2`, whose
/// eigenvectors `v` map to right eigenvectors of `P` as `psi = v / sqrt(pi)`
/// (unit norm in the `pi`-weighted inner product).
#[derive(Debug, Clone, PartialEq)]
pub struct MarkovChain {
    /// Neighbors including the node itself.
    rows: Vec<Vec<usize>>,
    degrees: Vec<f64>,
    pi: Vec<f64>,
    eigenvalues: Vec<f64>,
    /// `psi[k][i]`: k-th eigenvector at node i.
    psi: Vec<Vec<f64>>,
    second_magnitude: f64,
}

impl MarkovChain {
    pub fn n_nodes(&self) -> usize {
        self.pi.len()
    }

    pub fn stationary(&self) -> &[f64] {
        &self.pi
    }

    /// Retained eigenvalues, by descending magnitude; the first is 1.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn eigenvectors(&self) -> &[Vec<f64>] {
        &self.psi
    }

    pub fn n_eigenpairs(&self) -> usize {
        self.eigenvalues.len()
    }

    /// `|lambda_2|`, computed even when only one pair is retained; 0 for a
    /// single node.
    pub fn second_magnitude(&self) -> f64 {
        self.second_magnitude
    }

    /// Transition probability `P[i][j]`.
    pub fn transition(&self, i: usize, j: usize) -> f64 {
        if self.rows[i].contains(&j) {
            1.0 / self.degrees[i]
        } else {
            0.0
        }
    }

    /// Nodes reachable in one step from `i` (including `i`).
    pub fn support(&self, i: usize) -> &[usize] {
        &self.rows[i]
    }

    /// `y = x P` for a row vector `x`.
    pub fn step_distribution(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; x.len()];
        for (i, row) in self.rows.iter().enumerate() {
            let share = x[i] / self.degrees[i];
            for &j in row {
                y[j] += share;
            }
        }
        y
    }

    /// Coordinates `|lambda_k|^t psi_k(i)`; Euclidean distance between two
    /// rows is the diffusion distance at time `t`.
    pub fn embedding(&self, t: f64) -> Result<DiffusionEmbedding> {
        if !(t >= 0.0 && t.is_finite()) {
            return Err(Error::param(format!("diffusion time must be >= 0, got {t}")));
        }
        let dim = self.eigenvalues.len();
        let n = self.n_nodes();
        let scale: Vec<f64> = self.eigenvalues.iter().map(|l| l.abs().powf(t)).collect();
        let mut coords = vec![0.0; n * dim];
        for i in 0..n {
            for k in 0..dim {
                coords[i * dim + k] = scale[k] * self.psi[k][i];
            }
        }
        Ok(DiffusionEmbedding { t, dim, coords })
    }

    /// Diffusion distance between nodes `i` and `j` at time `t`.
    pub fn diffusion_distance(&self, i: usize, j: usize, t: f64) -> f64 {
        self.eigenvalues
            .iter()
            .zip(&self.psi)
            .map(|(l, v)| l.abs().powf(2.0 * t) * (v[i] - v[j]).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    /// Diagnostic text: sizes, bridges and the retained spectrum.
    pub fn metadata(&self, graph: &SpatialKnnGraph) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "nodes = {}", graph.n_nodes());
        let _ = writeln!(s, "edges = {}", graph.edges().len());
        let _ = writeln!(s, "radius = {}", graph.radius());
        let _ = writeln!(s, "k_n = {}", graph.k_n());
        let bridges: Vec<String> = graph
            .bridge_edges()
            .iter()
            .map(|&(a, b)| format!("{}-{}", graph.node_ids()[a], graph.node_ids()[b]))
            .collect();
        let _ = writeln!(s, "bridges = [{}]", bridges.join(", "));
        let _ = writeln!(s, "self_loops = true");
        let spectrum: Vec<String> = self.eigenvalues.iter().map(|l| format!("{l:.12e}")).collect();
        let _ = writeln!(s, "eigenvalues = [{}]", spectrum.join(", "));
        s
    }
}

/// Nodes embedded so that Euclidean distance equals diffusion distance.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffusionEmbedding {
    t: f64,
    dim: usize,
    coords: Vec<f64>,
}

impl DiffusionEmbedding {
    /// Wraps precomputed coordinates (`n` rows of `dim` values).
    pub fn from_coordinates(t: f64, dim: usize, coords: Vec<f64>) -> Result<Self> {
        if dim == 0 || coords.len() % dim != 0 {
            return Err(Error::Dimension(format!(
                "{} coordinates are not rows of {dim}",
                coords.len()
            )));
        }
        Ok(Self { t, dim, coords })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn n_nodes(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn distance(&self, i: usize, j: usize) -> f64 {
        self.row(i)
            .iter()
            .zip(self.row(j))
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }
}

/// Builds the walk on `graph` with self-loops and keeps the `l` eigenpairs
/// of largest magnitude.
pub fn markov_chain(graph: &SpatialKnnGraph, l: usize) -> Result<MarkovChain> {
    let n = graph.n_nodes();
    if l == 0 || l > n {
        return Err(Error::param(format!(
            "eigenpair count must be in 1..={n}, got {l}"
        )));
    }
    if !graph.is_connected() {
        return Err(Error::param("graph is not connected"));
    }
    let rows: Vec<Vec<usize>> = (0..n)
        .map(|i| {
            let mut r = vec![i];
            r.extend_from_slice(graph.neighbors(i));
            r.sort_unstable();
            r
        })
        .collect();
    let degrees: Vec<f64> = rows.iter().map(|r| r.len() as f64).collect();
    let total: f64 = degrees.iter().sum();
    let pi: Vec<f64> = degrees.iter().map(|d| d / total).collect();
    let inv_sqrt: Vec<f64> = degrees.iter().map(|d| 1.0 / d.sqrt()).collect();

    let wanted = l.max(2).min(n);
    let pairs = lanczos(n, wanted, EIGEN_TOL, LANCZOS_SEED, |x, y| {
        for (i, row) in rows.iter().enumerate() {
            let s: f64 = row.iter().map(|&j| x[j] * inv_sqrt[j]).sum();
            y[i] = s * inv_sqrt[i];
        }
    })?;
    let second_magnitude = if n > 1 { pairs.values[1].abs() } else { 0.0 };

    let mut eigenvalues = pairs.values;
    let mut psi: Vec<Vec<f64>> = pairs
        .vectors
        .into_iter()
        .map(|v| {
            let mut p: Vec<f64> = v.iter().zip(&pi).map(|(x, p)| x / p.sqrt()).collect();
            orient(&mut p);
            p
        })
        .collect();
    eigenvalues.truncate(l);
    psi.truncate(l);
    Ok(MarkovChain {
        rows,
        degrees,
        pi,
        eigenvalues,
        psi,
        second_magnitude,
    })
}

/// Level-exponent `T` of the dyadic time grid: the smallest `T >= 0` with
/// `|lambda_2|^(2^T) <= 2e-5 / min(pi)`, from the closed form
/// `ceil(log2(log_{|lambda_2|}(2e-5 / min pi)))`.
pub fn time_horizon(second_magnitude: f64, min_pi: f64) -> Result<u32> {
    if !(0.0..1.0).contains(&second_magnitude) {
        return Err(Error::param(format!(
            "|lambda_2| must lie in [0, 1), got {second_magnitude}"
        )));
    }
    if !(min_pi > 0.0) {
        return Err(Error::param("min(pi) must be positive"));
    }
    if second_magnitude == 0.0 {
        return Ok(0);
    }
    let inner = (2e-5 / min_pi).ln() / second_magnitude.ln();
    if !(inner > 1.0) {
        return Ok(0);
    }
    Ok(inner.log2().ceil() as u32)
}

/// `{0, 1, 2, 4, ..., 2^T}` for the chain's spectrum.
pub fn time_grid(chain: &MarkovChain) -> Result<Vec<f64>> {
    let min_pi = chain.stationary().iter().copied().fold(f64::INFINITY, f64::min);
    let t = time_horizon(chain.second_magnitude(), min_pi)?;
    Ok(dyadic_grid(t))
}

pub fn dyadic_grid(t_max: u32) -> Vec<f64> {
    std::iter::once(0.0)
        .chain((0..=t_max).map(|e| 2f64.powi(e as i32)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path(n: usize) -> SpatialKnnGraph {
        let adj = (0..n)
            .map(|i| if i + 1 < n { vec![i + 1] } else { vec![] })
            .collect();
        SpatialKnnGraph::from_adjacency((0..n).collect(), adj).unwrap()
    }

    #[test]
    fn two_node_chain() {
        let c = markov_chain(&path(2), 2).unwrap();
        assert_eq!(c.transition(0, 1), 0.5);
        assert_eq!(c.stationary(), &[0.5, 0.5]);
        assert!((c.eigenvalues()[0] - 1.0).abs() < 1e-12);
        assert!(c.eigenvalues()[1].abs() < 1e-12);
        assert!(c.diffusion_distance(0, 1, 1.0) < 1e-12);
        // 0^0 = 1: at t = 0 the second pair still counts
        assert!((c.diffusion_distance(0, 1, 0.0) - 2.0).abs() < 1e-10);
    }

    #[test]
    fn first_eigenvector_is_constant() {
        let c = markov_chain(&path(6), 3).unwrap();
        assert!(c.eigenvectors()[0].iter().all(|v| (v - 1.0).abs() < 1e-9));
        let pi = c.stationary();
        for v in c.eigenvectors() {
            let norm: f64 = v.iter().zip(pi).map(|(x, p)| p * x * x).sum();
            assert!((norm - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn stationary_is_invariant() {
        let c = markov_chain(&path(5), 2).unwrap();
        let next = c.step_distribution(c.stationary());
        for (a, b) in next.iter().zip(c.stationary()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn disconnected_graph_rejected() {
        let g = SpatialKnnGraph::from_adjacency(vec![0, 1, 2], vec![vec![1], vec![], vec![]])
            .unwrap();
        assert!(markov_chain(&g, 2).is_err());
    }

    #[test]
    fn horizon_examples() {
        assert_eq!(time_horizon(0.5, 0.01).unwrap(), 4);
        assert_eq!(time_horizon(0.0, 0.01).unwrap(), 0);
        assert_eq!(dyadic_grid(0), vec![0.0, 1.0]);
        assert_eq!(time_horizon(0.99, 1e-4).unwrap(), 8);
        assert_eq!(dyadic_grid(2), vec![0.0, 1.0, 2.0, 4.0]);
        assert!(time_horizon(1.0, 0.1).is_err());
    }
}
