use rayon::prelude::*;

use crate::density::RepresentativeSet;
use crate::diffusion::{DiffusionEmbedding, SpatialKnnGraph};
use crate::ers::SuperpixelMap;
use crate::error::{Error, Result};

/// Squared distance between embedding rows, or `None` once it exceeds
/// `bound`. Summation order matches [`DiffusionEmbedding::distance`].
#[inline]
fn sq_dist_bounded(a: &[f64], b: &[f64], bound: f64) -> Option<f64> {
    let mut acc = 0.0;
    for (ca, cb) in a.chunks(16).zip(b.chunks(16)) {
        for (x, y) in ca.iter().zip(cb) {
            acc += (x - y) * (x - y);
        }
        if acc > bound {
            return None;
        }
    }
    Some(acc)
}

/// Nodes by descending density, ties by index.
pub fn density_order(zeta: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..zeta.len()).collect();
    order.sort_by(|&a, &b| zeta[b].total_cmp(&zeta[a]).then(a.cmp(&b)));
    order
}

/// Diffusion distance from each node to its nearest node of no lower
/// density. The density maximizer (ties: smallest index) instead gets its
/// largest distance to any node.
pub fn dt_scores(emb: &DiffusionEmbedding, zeta: &[f64]) -> Result<Vec<f64>> {
    let n = zeta.len();
    if emb.n_nodes() != n {
        return Err(Error::Dimension(format!(
            "{} densities for {} embedded nodes",
            n,
            emb.n_nodes()
        )));
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    let order = density_order(zeta);
    let mut rank = vec![0usize; n];
    for (r, &i) in order.iter().enumerate() {
        rank[i] = r;
    }
    let peak = order[0];
    let mut out: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|x| {
            if x == peak {
                return 0.0;
            }
            let rx = emb.row(x);
            let mut best = f64::INFINITY;
            // everything ranked ahead, then equal-density nodes ranked behind
            let ahead = order[..rank[x]].iter();
            let tied = order[rank[x] + 1..]
                .iter()
                .take_while(|&&y| zeta[y] >= zeta[x]);
            for &y in ahead.chain(tied) {
                if let Some(d) = sq_dist_bounded(rx, emb.row(y), best) {
                    best = best.min(d);
                }
            }
            best.sqrt()
        })
        .collect();
    out[peak] = (0..n)
        .map(|y| emb.distance(peak, y))
        .fold(0.0, f64::max);
    Ok(out)
}

/// Outcome of mode selection.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeDiagnostics {
    pub d_t: Vec<f64>,
    /// `d_t * zeta`.
    pub delta: Vec<f64>,
    /// Node indices; `modes[k]` seeds label `k + 1`.
    pub modes: Vec<usize>,
}

/// Takes the `k` nodes of largest `d_t * zeta` (ties: smallest index).
pub fn select_modes(d_t: Vec<f64>, zeta: &[f64], k: usize) -> Result<ModeDiagnostics> {
    if k == 0 || k > zeta.len() {
        return Err(Error::param(format!(
            "cluster count must be in 1..={}, got {k}",
            zeta.len()
        )));
    }
    if d_t.len() != zeta.len() {
        return Err(Error::Dimension("d_t and density lengths differ".into()));
    }
    let delta: Vec<f64> = d_t.iter().zip(zeta).map(|(d, z)| d * z).collect();
    let mut order: Vec<usize> = (0..delta.len()).collect();
    order.sort_by(|&a, &b| delta[b].total_cmp(&delta[a]).then(a.cmp(&b)));
    order.truncate(k);
    Ok(ModeDiagnostics {
        d_t,
        delta,
        modes: order,
    })
}

/// Initial labels: each mode gets its rank label; with `use_lbb` its first
/// `k_n` graph neighbors (nearest spectrally) take the same label unless a
/// higher-ranked mode or a mode itself already claimed them. 0 = unlabeled.
pub fn label_backbones(
    modes: &[usize],
    graph: &SpatialKnnGraph,
    k_n: usize,
    use_lbb: bool,
) -> Vec<u32> {
    let mut labels = vec![0u32; graph.n_nodes()];
    for (rank, &m) in modes.iter().enumerate() {
        labels[m] = rank as u32 + 1;
    }
    if use_lbb {
        for (rank, &m) in modes.iter().enumerate() {
            for &j in graph.neighbors(m).iter().take(k_n) {
                if labels[j] == 0 {
                    labels[j] = rank as u32 + 1;
                }
            }
        }
    }
    labels
}

/// Labels every remaining node, visiting by descending density: a node takes
/// the label of its diffusion-nearest labeled node of no lower density
/// (ties: smallest index).
pub fn propagate_labels(
    partial: &[u32],
    emb: &DiffusionEmbedding,
    zeta: &[f64],
) -> Result<Vec<u32>> {
    let n = zeta.len();
    if partial.len() != n || emb.n_nodes() != n {
        return Err(Error::Dimension("labels, embedding and density lengths differ".into()));
    }
    let mut labels = partial.to_vec();
    let mut labeled: Vec<usize> = (0..n).filter(|&i| labels[i] > 0).collect();
    for x in density_order(zeta) {
        if labels[x] > 0 {
            continue;
        }
        let rx = emb.row(x);
        // (distance, node, squared distance); ties are judged on the distance
        // itself, so the squared bound gets a little slack
        let mut best: Option<(f64, usize, f64)> = None;
        for &y in &labeled {
            if zeta[y] < zeta[x] {
                continue;
            }
            let bound = best.map_or(f64::INFINITY, |b| b.2 * (1.0 + 1e-12));
            if let Some(d2) = sq_dist_bounded(rx, emb.row(y), bound) {
                let d = d2.sqrt();
                if best.is_none_or(|(bd, by, _)| d < bd || (d == bd && y < by)) {
                    best = Some((d, y, d2));
                }
            }
        }
        let (_, y, _) = best.ok_or(Error::NoAdmissibleLabel { node: x })?;
        labels[x] = labels[y];
        labeled.push(x);
    }
    Ok(labels)
}

/// Spreads representative labels to whole superpixels by plurality vote
/// (ties: smallest label). `rep_labels` follows the order of `reps.ids()`.
pub fn majority_vote(
    rep_labels: &[u32],
    reps: &RepresentativeSet,
    superpixels: &SuperpixelMap,
) -> Result<Vec<u32>> {
    if rep_labels.len() != reps.len() {
        return Err(Error::Dimension("one label per representative expected".into()));
    }
    let n_labels = rep_labels.iter().copied().max().unwrap_or(0) as usize;
    let winners: Vec<u32> = (1..=superpixels.n_superpixels() as u32)
        .map(|s| {
            let mut votes = vec![0usize; n_labels + 1];
            for &node in reps.of_superpixel(s) {
                votes[rep_labels[node] as usize] += 1;
            }
            // first maximum over labels 1.. is the smallest tied label
            let mut best = 0;
            for l in 1..=n_labels {
                if votes[l] > votes[best] {
                    best = l;
                }
            }
            best as u32
        })
        .collect();
    if let Some(s) = winners.iter().position(|&w| w == 0) {
        return Err(Error::param(format!(
            "superpixel {} has no labeled representative",
            s + 1
        )));
    }
    Ok(superpixels
        .assignment()
        .iter()
        .map(|&s| winners[s as usize - 1])
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::select_representatives;
    use crate::diffusion::markov_chain;

    fn complete(n: usize) -> SpatialKnnGraph {
        let adj = (0..n).map(|i| ((i + 1)..n).collect()).collect();
        SpatialKnnGraph::from_adjacency((0..n).collect(), adj).unwrap()
    }

    fn path(n: usize) -> SpatialKnnGraph {
        let adj = (0..n)
            .map(|i| if i + 1 < n { vec![i + 1] } else { vec![] })
            .collect();
        SpatialKnnGraph::from_adjacency((0..n).collect(), adj).unwrap()
    }

    #[test]
    fn two_nodes_share_score() {
        let chain = markov_chain(&path(2), 2).unwrap();
        let emb = chain.embedding(0.0).unwrap();
        let d = dt_scores(&emb, &[0.6, 0.4]).unwrap();
        assert_eq!(d[0], d[1]);
        assert_eq!(d[0], emb.distance(0, 1));
    }

    #[test]
    fn equal_density_tie_semantics() {
        let chain = markov_chain(&path(4), 4).unwrap();
        let emb = chain.embedding(1.0).unwrap();
        let d = dt_scores(&emb, &[0.25; 4]).unwrap();
        let far = (1..4).map(|y| emb.distance(0, y)).fold(0.0, f64::max);
        assert_eq!(d[0], far);
        for x in 1..4 {
            let near = (0..4)
                .filter(|&y| y != x)
                .map(|y| emb.distance(x, y))
                .fold(f64::INFINITY, f64::min);
            assert_eq!(d[x], near);
        }
    }

    #[test]
    fn all_modes_when_k_is_n() {
        let m = select_modes(vec![1.0, 2.0, 3.0], &[0.2, 0.3, 0.5], 3).unwrap();
        assert_eq!(m.modes, vec![2, 1, 0]);
        assert!(select_modes(vec![1.0], &[1.0], 0).is_err());
    }

    #[test]
    fn identical_spectra_pick_smallest_indices() {
        let m = select_modes(vec![0.0; 5], &[0.2; 5], 2).unwrap();
        assert_eq!(m.modes, vec![0, 1]);
    }

    #[test]
    fn backbone_precedence() {
        // star: 0 is shared by modes 1 and 2
        let g = SpatialKnnGraph::from_adjacency(vec![0, 1, 2], vec![vec![1, 2], vec![], vec![]])
            .unwrap();
        let l = label_backbones(&[2, 1], &g, 5, true);
        assert_eq!(l, vec![1, 2, 1]);
        let off = label_backbones(&[2, 1], &g, 5, false);
        assert_eq!(off, vec![0, 2, 1]);
    }

    #[test]
    fn single_mode_backbone() {
        let g = complete(4);
        assert_eq!(label_backbones(&[0], &g, 2, true), vec![1, 1, 1, 0]);
    }

    #[test]
    fn chain_inherits_single_label() {
        let chain = markov_chain(&path(3), 3).unwrap();
        let emb = chain.embedding(1.0).unwrap();
        let labels = propagate_labels(&[1, 0, 0], &emb, &[0.5, 0.3, 0.2]).unwrap();
        assert_eq!(labels, vec![1, 1, 1]);
    }

    #[test]
    fn equidistant_labeled_nodes_prefer_smaller_index() {
        // node 2 sits midway between nodes 0 and 1
        let emb = DiffusionEmbedding::from_coordinates(1.0, 1, vec![0.0, 2.0, 1.0]).unwrap();
        let labels = propagate_labels(&[2, 1, 0], &emb, &[0.4, 0.4, 0.2]).unwrap();
        assert_eq!(labels[2], 2);
    }

    #[test]
    fn missing_higher_density_label_is_an_error() {
        let chain = markov_chain(&path(2), 2).unwrap();
        let emb = chain.embedding(1.0).unwrap();
        let err = propagate_labels(&[0, 1], &emb, &[0.7, 0.3]).unwrap_err();
        assert!(matches!(err, Error::NoAdmissibleLabel { node: 0 }));
    }

    #[test]
    fn voting_rules() {
        let sp = SuperpixelMap::from_assignment(1, 7, vec![1, 1, 1, 2, 2, 3, 3]).unwrap();
        let reps = select_representatives(&[0.1; 7], &sp, 3).unwrap();
        let out = majority_vote(&[1, 2, 1, 2, 1, 3, 3], &reps, &sp).unwrap();
        assert_eq!(out, vec![1, 1, 1, 1, 1, 3, 3]);
    }
}
