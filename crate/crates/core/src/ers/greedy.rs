use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::lattice::LatticeGraph;
use super::map::SuperpixelMap;
use super::objective::{
    balance_term, endpoint_entropy_gain, entropy_rate, merge_balance_gain,
};
use crate::error::{Error, Result};
use crate::unionfind::UnionFind;

/// How the next edge is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GreedyStrategy {
    /// Priority queue of possibly stale gains; a popped edge is re-evaluated
    /// and accepted only if it still beats the best stale bound.
    #[default]
    Lazy,
    /// Re-evaluates every feasible edge at every step.
    Naive,
}

/// One accepted edge and the objective gain it produced.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GreedyStep {
    pub edge: usize,
    pub gain: f64,
    pub entropy_gain: f64,
}

/// A cycle-free edge set grown greedily on a [`LatticeGraph`].
#[derive(Debug, Clone)]
pub struct GreedyForest {
    alpha: f64,
    components: UnionFind,
    /// Self-loop weight left at each node.
    loops: Vec<f64>,
    steps: Vec<GreedyStep>,
    entropy: f64,
    balance: f64,
}

impl GreedyForest {
    /// The empty edge set: every pixel is its own component.
    pub fn new(graph: &LatticeGraph, alpha: f64) -> Self {
        let n = graph.n_nodes();
        Self {
            alpha,
            components: UnionFind::new(n),
            loops: graph.strength().to_vec(),
            steps: Vec::new(),
            entropy: 0.0,
            balance: balance_term(&vec![1; n], n),
        }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn n_components(&self) -> usize {
        self.components.n_sets()
    }

    /// Accepted edges in acceptance order.
    pub fn steps(&self) -> &[GreedyStep] {
        &self.steps
    }

    pub fn chosen(&self) -> Vec<usize> {
        self.steps.iter().map(|s| s.edge).collect()
    }

    /// Running entropy rate, accumulated from per-step gains.
    pub fn entropy(&self) -> f64 {
        self.entropy
    }

    /// Running balance term.
    pub fn balance(&self) -> f64 {
        self.balance
    }

    /// Current objective `H + alpha * B`.
    pub fn objective(&self) -> f64 {
        self.entropy + self.alpha * self.balance
    }

    /// Entropy rate recomputed from the chosen edge set.
    pub fn entropy_rate(&self, graph: &LatticeGraph) -> f64 {
        entropy_rate(graph, &self.chosen())
    }

    /// Balance term recomputed from the component sizes.
    pub fn balance_term(&mut self) -> f64 {
        let n = self.components.len();
        balance_term(&self.component_sizes(), n)
    }

    /// Component sizes, ordered by each component's smallest pixel.
    pub fn component_sizes(&mut self) -> Vec<usize> {
        let ids = self.components.dense_ids();
        let mut sizes = vec![0; self.n_components()];
        for id in ids {
            sizes[id] += 1;
        }
        sizes
    }

    /// Entropy and objective gain of adding `edge`, or `None` if it would
    /// close a cycle.
    pub fn gain(&mut self, graph: &LatticeGraph, edge: usize) -> Option<(f64, f64)> {
        let e = graph.edges()[edge];
        let (ra, rb) = (self.components.find(e.a), self.components.find(e.b));
        if ra == rb {
            return None;
        }
        let (strength, mu) = (graph.strength(), graph.mu());
        let dh = endpoint_entropy_gain(mu[e.a], strength[e.a], self.loops[e.a], e.weight)
            + endpoint_entropy_gain(mu[e.b], strength[e.b], self.loops[e.b], e.weight);
        let n = self.components.len();
        let db = merge_balance_gain(
            self.components.set_size(ra),
            self.components.set_size(rb),
            n,
        );
        Some((dh, dh + self.alpha * db))
    }

    fn accept(&mut self, graph: &LatticeGraph, edge: usize) {
        let (dh, gain) = self.gain(graph, edge).expect("accepted edge must be feasible");
        let e = graph.edges()[edge];
        let n = self.components.len();
        let db = merge_balance_gain(
            self.components.set_size(e.a),
            self.components.set_size(e.b),
            n,
        );
        self.components.union(e.a, e.b);
        self.loops[e.a] -= e.weight;
        self.loops[e.b] -= e.weight;
        self.entropy += dh;
        self.balance += db;
        self.steps.push(GreedyStep {
            edge,
            gain,
            entropy_gain: dh,
        });
    }

    /// Superpixel map of the current components.
    pub fn to_map(&mut self, graph: &LatticeGraph) -> SuperpixelMap {
        let ids = self.components.dense_ids();
        SuperpixelMap::from_assignment(
            graph.height(),
            graph.width(),
            ids.into_iter().map(|i| i as u32 + 1).collect(),
        )
        .expect("union-find ids are dense")
    }
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    gain: f64,
    edge: usize,
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Candidate {}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Candidate {
    // larger gain first, then smaller edge id
    fn cmp(&self, other: &Self) -> Ordering {
        self.gain
            .total_cmp(&other.gain)
            .then_with(|| other.edge.cmp(&self.edge))
    }
}

/// Grows the forest until it has `n_superpixels` components or no edge can be
/// added without closing a cycle. Ties in gain go to the smallest edge id.
pub fn grow_forest(
    graph: &LatticeGraph,
    n_superpixels: usize,
    alpha: f64,
    strategy: GreedyStrategy,
) -> Result<GreedyForest> {
    let n = graph.n_nodes();
    if n_superpixels == 0 || n_superpixels > n {
        return Err(Error::param(format!(
            "number of superpixels must be in 1..={n}, got {n_superpixels}"
        )));
    }
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::param(format!("balance weight must be > 0, got {alpha}")));
    }
    let mut forest = GreedyForest::new(graph, alpha);
    match strategy {
        GreedyStrategy::Lazy => grow_lazy(graph, n_superpixels, &mut forest),
        GreedyStrategy::Naive => grow_naive(graph, n_superpixels, &mut forest),
    }
    Ok(forest)
}

fn grow_lazy(graph: &LatticeGraph, target: usize, forest: &mut GreedyForest) {
    let mut heap: BinaryHeap<Candidate> = (0..graph.edges().len())
        .filter_map(|edge| forest.gain(graph, edge).map(|(_, gain)| Candidate { gain, edge }))
        .collect();
    while forest.n_components() > target {
        let Some(top) = heap.pop() else { break };
        let Some((_, gain)) = forest.gain(graph, top.edge) else {
            continue;
        };
        let fresh = Candidate {
            gain,
            edge: top.edge,
        };
        // stale gains only overestimate, so beating the best stale bound
        // makes this edge the true maximizer
        if heap.peek().is_none_or(|next| fresh > *next) {
            forest.accept(graph, fresh.edge);
        } else {
            heap.push(fresh);
        }
    }
}

fn grow_naive(graph: &LatticeGraph, target: usize, forest: &mut GreedyForest) {
    let mut used = vec![false; graph.edges().len()];
    while forest.n_components() > target {
        let mut best: Option<Candidate> = None;
        for edge in 0..graph.edges().len() {
            if used[edge] {
                continue;
            }
            if let Some((_, gain)) = forest.gain(graph, edge) {
                let c = Candidate { gain, edge };
                if best.is_none_or(|b| c > b) {
                    best = Some(c);
                }
            }
        }
        let Some(best) = best else { break };
        used[best.edge] = true;
        forest.accept(graph, best.edge);
    }
}

/// Segments the lattice into `n_superpixels` regions by lazy greedy
/// maximization of `H + alpha * B`.
pub fn greedy_segment(
    graph: &LatticeGraph,
    n_superpixels: usize,
    alpha: f64,
) -> Result<SuperpixelMap> {
    let mut forest = grow_forest(graph, n_superpixels, alpha, GreedyStrategy::Lazy)?;
    Ok(forest.to_map(graph))
}

/// Share of the balance term in the default weight.
pub const BALANCE_SHARE: f64 = 0.5;

/// Default balance weight: `n_superpixels / n_pixels` times the largest
/// entropy gain any single edge achieves from the empty set, measured in
/// units of the size-entropy change from merging two single pixels and
/// scaled by [`BALANCE_SHARE`]. Without that unit the balance term is about
/// `n_pixels` times too weak to matter on real images.
pub fn balancing_alpha(graph: &LatticeGraph, n_superpixels: usize) -> f64 {
    let (strength, mu) = (graph.strength(), graph.mu());
    let max_gain = graph
        .edges()
        .iter()
        .map(|e| {
            endpoint_entropy_gain(mu[e.a], strength[e.a], strength[e.a], e.weight)
                + endpoint_entropy_gain(mu[e.b], strength[e.b], strength[e.b], e.weight)
        })
        .fold(0.0, f64::max);
    let n = graph.n_nodes() as f64;
    let pair_merge = 2.0 * std::f64::consts::LN_2 / n;
    BALANCE_SHARE * n_superpixels as f64 / n * max_gain / pair_merge
}

#[cfg(test)]
mod tests {
    use super::super::lattice::{build_lattice, Connectivity};
    use super::*;
    use crate::hsi::PcaProjection;

    fn lattice(h: usize, w: usize, scores: Vec<f64>) -> LatticeGraph {
        let k = scores.len() / (h * w);
        let f = PcaProjection::from_scores(h, w, k, scores).unwrap();
        build_lattice(&f, 5.0, Connectivity::Eight).unwrap()
    }

    #[test]
    fn n_superpixels_equal_n_chooses_nothing() {
        let g = lattice(3, 3, (0..9).map(f64::from).collect());
        let mut f = grow_forest(&g, 9, 0.1, GreedyStrategy::Lazy).unwrap();
        assert!(f.steps().is_empty());
        let map = f.to_map(&g);
        assert_eq!(map.n_superpixels(), 9);
        assert_eq!(map.assignment(), &(1..=9).collect::<Vec<u32>>()[..]);
    }

    #[test]
    fn one_superpixel_spans_lattice() {
        let g = lattice(3, 4, (0..12).map(|v| f64::from(v % 5)).collect());
        let mut f = grow_forest(&g, 1, 0.1, GreedyStrategy::Lazy).unwrap();
        assert_eq!(f.steps().len(), 11);
        let map = f.to_map(&g);
        assert_eq!(map.n_superpixels(), 1);
        assert!(map.assignment().iter().all(|&s| s == 1));
    }

    #[test]
    fn two_homogeneous_halves() {
        // 4x4, left 4x2 half at 0, right half at 100
        let scores: Vec<f64> = (0..16).map(|i| if i % 4 < 2 { 0.0 } else { 100.0 }).collect();
        let g = lattice(4, 4, scores);
        let alpha = balancing_alpha(&g, 2);
        let lazy = greedy_segment(&g, 2, alpha).unwrap();
        let mut naive = grow_forest(&g, 2, alpha, GreedyStrategy::Naive).unwrap();
        let naive = naive.to_map(&g);
        assert_eq!(lazy, naive);
        let expected: Vec<u32> = (0..16).map(|i| if i % 4 < 2 { 1 } else { 2 }).collect();
        assert_eq!(lazy.assignment(), &expected[..]);
    }

    #[test]
    fn running_terms_match_recomputation() {
        let g = lattice(4, 4, (0..16).map(|i| f64::from((i * 7) % 11)).collect());
        let mut f = grow_forest(&g, 5, 0.05, GreedyStrategy::Lazy).unwrap();
        assert!((f.entropy() - f.entropy_rate(&g)).abs() < 1e-12);
        assert!((f.balance() - f.balance_term()).abs() < 1e-12);
        assert_eq!(f.steps().len() + f.n_components(), 16);
    }

    #[test]
    fn alpha_doubles_with_superpixels() {
        let g = lattice(3, 3, (0..9).map(f64::from).collect());
        let a = balancing_alpha(&g, 2);
        assert!((balancing_alpha(&g, 4) - 2.0 * a).abs() < 1e-15);
        assert!(a > 0.0);
    }

    #[test]
    fn uniform_weights_alpha() {
        // 1x2 lattice, identical features: one edge, weight 1, w = (1, 1).
        // Adding it moves each endpoint from q = 1 to q_ii = 0, q_ij = 1: gain 0.
        // On a 1x3 path the middle node has w = 2 and gains ln 2 / 2.
        // Merging two of three single pixels changes the size entropy by
        // 2 ln 2 / 3, so alpha = 0.5 * (3 / 3) * (ln 2 / 2) / (2 ln 2 / 3) = 0.375.
        let g = lattice(1, 3, vec![1.0; 3]);
        assert!((balancing_alpha(&g, 3) - 0.375).abs() < 1e-15);
    }

    #[test]
    fn bad_parameters() {
        let g = lattice(2, 2, vec![0.0; 4]);
        assert!(grow_forest(&g, 0, 0.1, GreedyStrategy::Lazy).is_err());
        assert!(grow_forest(&g, 5, 0.1, GreedyStrategy::Lazy).is_err());
        assert!(grow_forest(&g, 2, 0.0, GreedyStrategy::Lazy).is_err());
    }
}
