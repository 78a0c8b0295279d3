use std::collections::BTreeSet;
use std::fmt::Write as _;

use rayon::prelude::*;

use crate::density::{sq_dist, RepresentativeSet};
use crate::error::{Error, Result};
use crate::hsi::HsiCube;
use crate::unionfind::UnionFind;

/// Unweighted undirected kNN graph over representative pixels, with edges
/// restricted to a square spatial window.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialKnnGraph {
    node_ids: Vec<usize>,
    radius: usize,
    k_n: usize,
    /// Neighbors of each node, nearest (spectrally) first, ties by index.
    adjacency: Vec<Vec<usize>>,
    bridge_edges: Vec<(usize, usize)>,
}

impl SpatialKnnGraph {
    /// Builds a graph directly from node-index adjacency; lists are
    /// symmetrized and kept in the given order. Intended for tests and
    /// tools that need the chain machinery on arbitrary graphs.
    pub fn from_adjacency(node_ids: Vec<usize>, adjacency: Vec<Vec<usize>>) -> Result<Self> {
        let n = node_ids.len();
        if adjacency.len() != n {
            return Err(Error::Dimension(format!(
                "{} adjacency lists for {n} nodes",
                adjacency.len()
            )));
        }
        let mut sets: Vec<Vec<usize>> = adjacency.clone();
        for (i, list) in adjacency.iter().enumerate() {
            for &j in list {
                if j >= n || j == i {
                    return Err(Error::param(format!("invalid edge {i}-{j}")));
                }
                if !sets[j].contains(&i) {
                    sets[j].push(i);
                }
            }
        }
        for list in &mut sets {
            let mut seen = BTreeSet::new();
            list.retain(|j| seen.insert(*j));
        }
        Ok(Self {
            node_ids,
            radius: 0,
            k_n: 0,
            adjacency: sets,
            bridge_edges: Vec::new(),
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.node_ids.len()
    }

    /// Pixel index of each node.
    pub fn node_ids(&self) -> &[usize] {
        &self.node_ids
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    pub fn k_n(&self) -> usize {
        self.k_n
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.adjacency[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.adjacency[i].len()
    }

    /// Edges added to join otherwise disconnected components.
    pub fn bridge_edges(&self) -> &[(usize, usize)] {
        &self.bridge_edges
    }

    /// Undirected edges `(i, j)` with `i < j`, sorted.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out: Vec<(usize, usize)> = self
            .adjacency
            .iter()
            .enumerate()
            .flat_map(|(i, l)| l.iter().filter(move |&&j| i < j).map(move |&j| (i, j)))
            .collect();
        out.sort_unstable();
        out
    }

    pub fn is_connected(&self) -> bool {
        let mut uf = UnionFind::new(self.n_nodes());
        for (i, j) in self.edges() {
            uf.union(i, j);
        }
        uf.n_sets() <= 1
    }

    /// Edge list as `i,j,w` lines (pixel indices, unit weights).
    pub fn edges_csv(&self) -> String {
        let mut s = String::from("i,j,w\n");
        for (i, j) in self.edges() {
            let _ = writeln!(s, "{},{},1", self.node_ids[i], self.node_ids[j]);
        }
        s
    }
}

/// Builds the window-restricted kNN graph over `reps`.
///
/// Each node links to its `k_n` spectrally nearest fellow representatives
/// inside the `(2R+1) x (2R+1)` window around it (all of them if fewer),
/// and the directed lists are symmetrized by union. Leftover components are
/// joined by their spectrally closest cross-component pair, in rounds, until
/// the graph is connected; those edges are recorded as bridges.
pub fn build_spatial_knn(
    cube: &HsiCube,
    reps: &RepresentativeSet,
    k_n: usize,
    radius: usize,
) -> Result<SpatialKnnGraph> {
    let n = reps.len();
    if n <= 1 {
        return Err(Error::param(format!(
            "graph needs at least two representatives, got {n}"
        )));
    }
    if k_n == 0 {
        return Err(Error::param("k_n must be >= 1"));
    }
    if radius == 0 {
        return Err(Error::param("window radius must be >= 1"));
    }
    let ids = reps.ids();
    let (h, w) = (cube.height(), cube.width());
    let mut node_at = vec![usize::MAX; h * w];
    for (node, &p) in ids.iter().enumerate() {
        node_at[p] = node;
    }
    let spectrum = |node: usize| cube.pixel(ids[node]);

    let directed: Vec<Vec<(f64, usize)>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let (r, c) = (ids[i] / w, ids[i] % w);
            let (r0, r1) = (r.saturating_sub(radius), (r + radius).min(h - 1));
            let (c0, c1) = (c.saturating_sub(radius), (c + radius).min(w - 1));
            let x = spectrum(i);
            let mut cand = Vec::new();
            for rr in r0..=r1 {
                for &j in &node_at[rr * w + c0..=rr * w + c1] {
                    if j != usize::MAX && j != i {
                        cand.push((sq_dist(x, spectrum(j)), j));
                    }
                }
            }
            cand.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            cand.truncate(k_n);
            cand
        })
        .collect();

    let mut lists: Vec<Vec<(f64, usize)>> = directed.clone();
    for (i, list) in directed.iter().enumerate() {
        for &(d, j) in list {
            lists[j].push((d, i));
        }
    }

    let mut uf = UnionFind::new(n);
    for (i, list) in directed.iter().enumerate() {
        for &(_, j) in list {
            uf.union(i, j);
        }
    }
    let mut bridge_edges = Vec::new();
    while uf.n_sets() > 1 {
        let comp = uf.dense_ids();
        let n_comp = uf.n_sets();
        let mut sizes = vec![0usize; n_comp];
        comp.iter().for_each(|&c| sizes[c] += 1);
        // ties go to the component holding the smallest node
        let largest = (0..n_comp)
            .rev()
            .max_by_key(|&c| sizes[c])
            .expect("at least two components");
        let bridges: Vec<(usize, usize, f64)> = (0..n_comp)
            .into_par_iter()
            .filter(|&c| c != largest)
            .map(|c| {
                let mut best = (f64::INFINITY, usize::MAX, usize::MAX);
                for a in (0..n).filter(|&a| comp[a] == c) {
                    let xa = spectrum(a);
                    for b in (0..n).filter(|&b| comp[b] != c) {
                        let d = sq_dist(xa, spectrum(b));
                        let key = (d, a.min(b), a.max(b));
                        if key.0 < best.0 || (key.0 == best.0 && (key.1, key.2) < (best.1, best.2)) {
                            best = key;
                        }
                    }
                }
                (best.1, best.2, best.0)
            })
            .collect();
        for (a, b, d) in bridges {
            if lists[a].iter().any(|&(_, j)| j == b) {
                continue;
            }
            lists[a].push((d, b));
            lists[b].push((d, a));
            uf.union(a, b);
            bridge_edges.push((a, b));
        }
    }

    let adjacency = lists
        .into_iter()
        .map(|mut l| {
            l.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            let mut seen = BTreeSet::new();
            l.retain(|e| seen.insert(e.1));
            l.into_iter().map(|e| e.1).collect()
        })
        .collect();
    bridge_edges.sort_unstable();
    Ok(SpatialKnnGraph {
        node_ids: ids.to_vec(),
        radius,
        k_n,
        adjacency,
        bridge_edges,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::select_representatives;
    use crate::ers::SuperpixelMap;

    fn all_pixels(cube: &HsiCube) -> RepresentativeSet {
        let n = cube.n_pixels();
        let sp = SuperpixelMap::from_assignment(
            cube.height(),
            cube.width(),
            (1..=n as u32).collect(),
        )
        .unwrap();
        select_representatives(&vec![1.0 / n as f64; n], &sp, 1).unwrap()
    }

    #[test]
    fn wide_window_is_plain_knn() {
        let values: Vec<f64> = vec![0.0, 0.1, 5.0, 5.2, 9.0, 0.05];
        let cube = HsiCube::new(2, 3, 1, values.clone()).unwrap();
        let g = build_spatial_knn(&cube, &all_pixels(&cube), 1, 10).unwrap();
        let knn = crate::density::knn_index(&values, 1, 1).unwrap();
        for i in 0..6 {
            let j = knn.neighbors(i)[0];
            assert!(g.neighbors(i).contains(&j));
            assert!(g.neighbors(j).contains(&i));
        }
        assert!(g.is_connected());
    }

    #[test]
    fn isolated_node_gets_one_bridge() {
        // 1x7 strip without pixel 5 among the representatives: pixel 6 has
        // no candidates within radius 1
        let cube = HsiCube::new(1, 7, 1, vec![0.0, 0.1, 0.2, 0.3, 0.4, 9.0, 0.35]).unwrap();
        let sp = SuperpixelMap::from_assignment(1, 7, vec![1, 2, 3, 4, 5, 5, 6]).unwrap();
        // superpixel 5 keeps pixel 4 (higher zeta), so pixel 5 is not selected
        let zeta = [0.1, 0.1, 0.1, 0.1, 0.2, 0.1, 0.1];
        let reps = select_representatives(&zeta, &sp, 1).unwrap();
        assert_eq!(reps.ids(), &[0, 1, 2, 3, 4, 6]);
        let g = build_spatial_knn(&cube, &reps, 2, 1).unwrap();
        assert_eq!(g.degree(5), 1);
        // spectrally closest to 0.35 is pixel 3 (node 3)
        assert_eq!(g.bridge_edges(), &[(3, 5)]);
        assert!(g.is_connected());
    }

    #[test]
    fn neighbors_sorted_by_spectral_distance() {
        let cube = HsiCube::new(1, 4, 1, vec![0.0, 3.0, 1.0, 2.5]).unwrap();
        let g = build_spatial_knn(&cube, &all_pixels(&cube), 3, 5).unwrap();
        assert_eq!(g.neighbors(0), &[2, 3, 1]);
    }

    #[test]
    fn rejects_bad_params() {
        let cube = HsiCube::new(1, 2, 1, vec![0.0, 1.0]).unwrap();
        let reps = all_pixels(&cube);
        assert!(build_spatial_knn(&cube, &reps, 1, 0).is_err());
        assert!(build_spatial_knn(&cube, &reps, 0, 1).is_err());
    }

    #[test]
    fn csv_dump_uses_pixel_ids() {
        let cube = HsiCube::new(1, 2, 1, vec![0.0, 1.0]).unwrap();
        let g = build_spatial_knn(&cube, &all_pixels(&cube), 1, 1).unwrap();
        assert_eq!(g.edges_csv(), "i,j,w\n0,1,1\n");
    }
}
