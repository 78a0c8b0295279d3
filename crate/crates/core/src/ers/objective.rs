//! Entropy-rate and balance terms of the superpixel objective.
//!
//! A random walk on the lattice keeps the full node strength `w_i` at every
//! node: weight of edges outside the chosen set `A` is folded into a
//! self-loop. The walk's entropy rate is
//! `H(A) = -sum_i mu_i sum_j q_ij log q_ij` with `q_ij = Z_ij / w_i` for
//! `(i, j)` in `A` and `q_ii = 1 - sum_{k in A_i} Z_ik / w_i`. The balance
//! term over the connected components of `A` is
//! `B(A) = -sum_c r_c log r_c - N_A` with `r_c` the component's pixel fraction.

use super::lattice::LatticeGraph;

/// `-x ln x`, continuously extended with `0` at `x <= 0`.
#[inline]
pub(crate) fn neg_xlogx(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        -x * x.ln()
    }
}

/// Entropy rate of the walk restricted to `chosen` edge ids.
pub fn entropy_rate(graph: &LatticeGraph, chosen: &[usize]) -> f64 {
    let n = graph.n_nodes();
    let strength = graph.strength();
    let mut loops = strength.to_vec();
    let mut off_diagonal = vec![0.0; n];
    for &e in chosen {
        let edge = graph.edges()[e];
        for (i, _) in [(edge.a, edge.b), (edge.b, edge.a)] {
            loops[i] -= edge.weight;
            off_diagonal[i] += neg_xlogx(edge.weight / strength[i]);
        }
    }
    (0..n)
        .map(|i| {
            if strength[i] == 0.0 {
                return 0.0;
            }
            let q_ii = (loops[i] / strength[i]).max(0.0);
            graph.mu()[i] * (neg_xlogx(q_ii) + off_diagonal[i])
        })
        .sum()
}

/// Balance term over component sizes of an `n`-pixel lattice.
pub fn balance_term(component_sizes: &[usize], n: usize) -> f64 {
    let n = n as f64;
    component_sizes
        .iter()
        .map(|&s| neg_xlogx(s as f64 / n))
        .sum::<f64>()
        - component_sizes.len() as f64
}

/// Entropy gain at one endpoint whose self-loop holds `loop_weight` of its
/// `strength` when an edge of weight `weight` is added.
#[inline]
pub(crate) fn endpoint_entropy_gain(mu: f64, strength: f64, loop_weight: f64, weight: f64) -> f64 {
    let q = loop_weight / strength;
    let p = weight / strength;
    let after = ((loop_weight - weight) / strength).max(0.0);
    mu * (neg_xlogx(after) + neg_xlogx(p) - neg_xlogx(q))
}

/// Balance gain of merging components of `a` and `b` pixels out of `n`.
#[inline]
pub(crate) fn merge_balance_gain(a: usize, b: usize, n: usize) -> f64 {
    let n = n as f64;
    let (ra, rb) = (a as f64 / n, b as f64 / n);
    neg_xlogx(ra + rb) - neg_xlogx(ra) - neg_xlogx(rb) + 1.0
}

#[cfg(test)]
mod tests {
    use super::super::lattice::{LatticeEdge, LatticeGraph};
    use super::*;

    fn path3() -> LatticeGraph {
        LatticeGraph::from_edges(
            1,
            3,
            vec![
                LatticeEdge { a: 0, b: 1, weight: 1.0 },
                LatticeEdge { a: 1, b: 2, weight: 1.0 },
            ],
        )
        .unwrap()
    }

    #[test]
    fn empty_set_has_zero_entropy() {
        assert_eq!(entropy_rate(&path3(), &[]), 0.0);
    }

    #[test]
    fn two_nodes_deterministic_walk() {
        let g = LatticeGraph::from_edges(1, 2, vec![LatticeEdge { a: 0, b: 1, weight: 1.0 }])
            .unwrap();
        assert_eq!(entropy_rate(&g, &[0]), 0.0);
    }

    #[test]
    fn path_of_three_by_enumeration() {
        // w = (1, 2, 1), mu = (1/4, 1/2, 1/4). With A = {(0,1)}:
        // row 0: q00 = 0, q01 = 1
        // row 1: q10 = 1/2, q11 = 1 - 1/2 = 1/2, q12 = 0
        // row 2: q22 = 1
        // H = 1/2 * (-(1/2 ln 1/2) * 2) = 1/2 ln 2
        let q = [[0.0, 1.0, 0.0], [0.5, 0.5, 0.0], [0.0, 0.0, 1.0]];
        let mu = [0.25, 0.5, 0.25];
        let mut expected = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                if q[i][j] > 0.0 {
                    expected -= mu[i] * q[i][j] * f64::ln(q[i][j]);
                }
            }
        }
        assert!((expected - 0.5 * 2f64.ln()).abs() < 1e-15);
        assert!((entropy_rate(&path3(), &[0]) - expected).abs() < 1e-15);
    }

    #[test]
    fn balance_singletons() {
        let b = balance_term(&[1, 1, 1, 1], 4);
        assert!((b - (4f64.ln() - 4.0)).abs() < 1e-15);
    }

    #[test]
    fn balance_single_component() {
        assert_eq!(balance_term(&[4], 4), -1.0);
    }

    #[test]
    fn balance_two_halves() {
        let b = balance_term(&[2, 2], 4);
        assert!((b - (2f64.ln() - 2.0)).abs() < 1e-15);
    }

    #[test]
    fn merge_gain_matches_difference() {
        let before = balance_term(&[3, 2, 5], 10);
        let after = balance_term(&[5, 5], 10);
        assert!((merge_balance_gain(3, 2, 10) - (after - before)).abs() < 1e-14);
    }
}
