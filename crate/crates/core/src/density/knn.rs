//! Exact Euclidean k-nearest-neighbor search.
//!
//! Points are grouped around pivots. Queries are handled a tile at a time,
//! against candidate cells in order of pivot distance, and a cell is skipped
//! once the triangle inequality puts it beyond every query's current k-th
//! distance. Distances inside a tile pair come from one matrix product
//! (`|x|^2 + |y|^2 - 2 x.y`) together with a rounding bound, which only
//! filters candidates: the survivors are re-measured directly and ranked by
//! `(squared distance, index)`, so the result is the exact k-NN set with ties
//! broken by smaller index.

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Neighbor table: `k` neighbors per point, nearest first.
#[derive(Debug, Clone, PartialEq)]
pub struct KnnTable {
    k: usize,
    ids: Vec<usize>,
    dists: Vec<f64>,
}

impl KnnTable {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n_points(&self) -> usize {
        self.ids.len() / self.k
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.ids[i * self.k..(i + 1) * self.k]
    }

    /// Euclidean distances matching [`KnnTable::neighbors`], non-decreasing.
    pub fn distances(&self, i: usize) -> &[f64] {
        &self.dists[i * self.k..(i + 1) * self.k]
    }

    /// Every stored distance, point-major.
    pub fn all_distances(&self) -> &[f64] {
        &self.dists
    }

    /// Keeps only the `k` nearest of each row.
    pub fn truncated(&self, k: usize) -> Result<Self> {
        if k == 0 || k > self.k {
            return Err(Error::param(format!(
                "cannot truncate a {}-NN table to {k}",
                self.k
            )));
        }
        let n = self.n_points();
        let mut ids = Vec::with_capacity(n * k);
        let mut dists = Vec::with_capacity(n * k);
        for i in 0..n {
            ids.extend_from_slice(&self.neighbors(i)[..k]);
            dists.extend_from_slice(&self.distances(i)[..k]);
        }
        Ok(Self { k, ids, dists })
    }
}

/// Squared distance, or `None` once the partial sum exceeds `bound`.
#[inline]
fn sq_dist_bounded(a: &[f64], b: &[f64], bound: f64) -> Option<f64> {
    let mut acc = 0.0;
    for chunk in (0..a.len()).step_by(8) {
        let end = (chunk + 8).min(a.len());
        for d in chunk..end {
            let t = a[d] - b[d];
            acc += t * t;
        }
        if acc > bound {
            return None;
        }
    }
    Some(acc)
}

#[inline]
pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Bounded list of the best `(squared distance, index)` pairs, sorted.
struct Best {
    k: usize,
    items: Vec<(f64, usize)>,
}

impl Best {
    fn bound(&self) -> f64 {
        if self.items.len() < self.k {
            f64::INFINITY
        } else {
            self.items[self.k - 1].0
        }
    }

    fn offer(&mut self, d2: f64, j: usize) {
        let key = (d2, j);
        let less = |a: &(f64, usize), b: &(f64, usize)| a.0 < b.0 || (a.0 == b.0 && a.1 < b.1);
        if self.items.len() == self.k {
            if !less(&key, &self.items[self.k - 1]) {
                return;
            }
            self.items.pop();
        }
        let at = self.items.partition_point(|x| less(x, &key));
        self.items.insert(at, key);
    }
}

/// Points grouped around pivot points, each group sorted by distance to
/// its pivot.
struct Cells {
    pivots: Vec<usize>,
    /// Members of each cell as `(distance to pivot, index)`, ascending.
    members: Vec<Vec<(f64, usize)>>,
    radius: Vec<f64>,
}

/// `~sqrt(n)` evenly strided pivots; every point joins its nearest pivot
/// (ties: first pivot).
fn build_cells(points: &[f64], dim: usize) -> Cells {
    let n = points.len() / dim;
    let row = |i: usize| &points[i * dim..(i + 1) * dim];
    let c = ((n as f64).sqrt().ceil() as usize).clamp(1, n);
    let pivots: Vec<usize> = (0..c).map(|j| j * n / c).collect();
    let owner: Vec<(usize, f64)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut best = (0, f64::INFINITY);
            for (j, &p) in pivots.iter().enumerate() {
                if let Some(d2) = sq_dist_bounded(row(i), row(p), best.1) {
                    if d2 < best.1 {
                        best = (j, d2);
                    }
                }
            }
            (best.0, best.1.sqrt())
        })
        .collect();
    let mut members = vec![Vec::new(); c];
    for (i, &(j, d)) in owner.iter().enumerate() {
        members[j].push((d, i));
    }
    for m in &mut members {
        m.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    }
    let radius = members.iter().map(|m| m.last().map_or(0.0, |x| x.0)).collect();
    Cells { pivots, members, radius }
}

const QUERY_TILE: usize = 128;
const CANDIDATE_TILE: usize = 512;

/// Exact `k` nearest neighbors of every point, excluding the point itself.
/// `points` holds `n` rows of `dim` values.
pub fn knn_index(points: &[f64], dim: usize, k: usize) -> Result<KnnTable> {
    if dim == 0 || points.len() % dim != 0 {
        return Err(Error::Dimension(format!(
            "{} values are not a whole number of {dim}-dimensional points",
            points.len()
        )));
    }
    let n = points.len() / dim;
    if k == 0 || k >= n {
        return Err(Error::param(format!(
            "neighbor count must be in 1..{n}, got {k}"
        )));
    }
    let row = |i: usize| &points[i * dim..(i + 1) * dim];
    let cells = build_cells(points, dim);
    let n_cells = cells.pivots.len();

    // centered copy in cell order; centering keeps the norms, and with them
    // the rounding bound, small
    let mut mean = vec![0.0; dim];
    for i in 0..n {
        for (m, v) in mean.iter_mut().zip(row(i)) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let order: Vec<usize> = cells.members.iter().flat_map(|m| m.iter().map(|x| x.1)).collect();
    let mut start = vec![0; n_cells + 1];
    for c in 0..n_cells {
        start[c + 1] = start[c] + cells.members[c].len();
    }
    let mut packed = vec![0.0; n * dim];
    packed.par_chunks_mut(dim).zip(order.par_iter()).for_each(|(dst, &i)| {
        for ((d, v), m) in dst.iter_mut().zip(row(i)).zip(&mean) {
            *d = v - m;
        }
    });
    let norms: Vec<f64> = packed.par_chunks(dim).map(|r| r.iter().map(|v| v * v).sum()).collect();
    // generous bound on the rounding error of the expanded form, relative to
    // |x|^2 + |y|^2
    let slack = 8.0 * (dim as f64 + 4.0) * f64::EPSILON;
    // slack keeps rounding in the bounds from pruning a true neighbor
    let exceeds = |gap: f64, bound: f64| gap > 0.0 && gap * gap > bound * (1.0 + 1e-9) + 1e-300;

    let tiles: Vec<(usize, usize, usize)> = (0..n_cells)
        .flat_map(|c| {
            let end = start[c + 1];
            (start[c]..end)
                .step_by(QUERY_TILE)
                .map(move |lo| (c, lo, (lo + QUERY_TILE).min(end)))
        })
        .collect();

    let solved: Vec<Vec<Vec<(f64, usize)>>> = tiles
        .par_iter()
        .map(|&(a, lo, hi)| {
            let m = hi - lo;
            let pa = row(cells.pivots[a]);
            // distance of each query to its own pivot
            let dq: Vec<f64> = (lo..hi).map(|p| cells.members[a][p - start[a]].0).collect();
            let mut upper: Vec<Best> = (0..m)
                .map(|_| Best {
                    k,
                    items: Vec::with_capacity(k + 1),
                })
                .collect();
            let mut cands: Vec<Vec<(f64, usize)>> = vec![Vec::new(); m];
            let mut by_pivot: Vec<(f64, usize)> = (0..n_cells)
                .map(|c| (sq_dist(pa, row(cells.pivots[c])).sqrt(), c))
                .collect();
            by_pivot.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
            let mut gram = vec![0.0; m * CANDIDATE_TILE];

            for &(dpp, c) in &by_pivot {
                let active: Vec<usize> = (0..m)
                    .filter(|&q| !exceeds(dpp - dq[q] - cells.radius[c], upper[q].bound()))
                    .collect();
                if active.is_empty() {
                    continue;
                }
                for clo in (start[c]..start[c + 1]).step_by(CANDIDATE_TILE) {
                    let chi = (clo + CANDIDATE_TILE).min(start[c + 1]);
                    let w = chi - clo;
                    // SAFETY: the slices cover m x dim, w x dim and m x w
                    // values at the strides given.
                    unsafe {
                        matrixmultiply::dgemm(
                            m,
                            dim,
                            w,
                            1.0,
                            packed[lo * dim..].as_ptr(),
                            dim as isize,
                            1,
                            packed[clo * dim..].as_ptr(),
                            1,
                            dim as isize,
                            0.0,
                            gram.as_mut_ptr(),
                            w as isize,
                            1,
                        );
                    }
                    for &q in &active {
                        let nq = norms[lo + q];
                        let g = &gram[q * w..(q + 1) * w];
                        for (t, &gv) in g.iter().enumerate() {
                            let p = clo + t;
                            if p == lo + q {
                                continue;
                            }
                            let approx = nq + norms[p] - 2.0 * gv;
                            let err = slack * (nq + norms[p]);
                            let lower = approx - err;
                            if lower <= upper[q].bound() {
                                upper[q].offer(approx + err, p);
                                cands[q].push((lower, p));
                            }
                        }
                        if cands[q].len() > 4 * k + 64 {
                            let b = upper[q].bound();
                            cands[q].retain(|x| x.0 <= b);
                        }
                    }
                }
            }

            (0..m)
                .map(|q| {
                    let b = upper[q].bound();
                    let i = order[lo + q];
                    let x = row(i);
                    let mut exact: Vec<(f64, usize)> = cands[q]
                        .iter()
                        .filter(|c| c.0 <= b)
                        .map(|c| {
                            let j = order[c.1];
                            (sq_dist(x, row(j)), j)
                        })
                        .collect();
                    exact.sort_by(|u, v| u.0.total_cmp(&v.0).then(u.1.cmp(&v.1)));
                    exact.truncate(k);
                    exact
                })
                .collect()
        })
        .collect();

    let mut rows: Vec<Vec<(f64, usize)>> = vec![Vec::new(); n];
    for (&(_, lo, _), tile) in tiles.iter().zip(solved) {
        for (q, r) in tile.into_iter().enumerate() {
            rows[order[lo + q]] = r;
        }
    }
    let mut ids = Vec::with_capacity(n * k);
    let mut dists = Vec::with_capacity(n * k);
    for r in rows {
        debug_assert_eq!(r.len(), k);
        for (d2, j) in r {
            ids.push(j);
            dists.push(d2.sqrt());
        }
    }
    Ok(KnnTable { k, ids, dists })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn collinear_points() {
        let t = knn_index(&[0.0, 1.0, 3.0], 1, 1).unwrap();
        assert_eq!(
            (0..3).map(|i| t.neighbors(i)[0]).collect::<Vec<_>>(),
            vec![1, 0, 1]
        );
        assert_eq!(t.distances(2), &[2.0]);
    }

    #[test]
    fn duplicates_list_each_other() {
        let t = knn_index(&[5.0, 5.0, 5.0, 5.0, 9.0, 9.0], 2, 1).unwrap();
        assert_eq!(t.neighbors(0), &[1]);
        assert_eq!(t.neighbors(1), &[0]);
        assert_eq!(t.distances(0), &[0.0]);
    }

    #[test]
    fn equidistant_tie_prefers_smaller_index() {
        // 1 is equidistant from 0 and 2
        let t = knn_index(&[0.0, 1.0, 2.0], 1, 1).unwrap();
        assert_eq!(t.neighbors(1), &[0]);
    }

    #[test]
    fn k_must_be_below_n() {
        assert!(knn_index(&[0.0, 1.0], 1, 2).is_err());
        assert!(knn_index(&[0.0, 1.0], 1, 0).is_err());
    }

    #[test]
    fn truncation_keeps_prefix() {
        let t = knn_index(&[0.0, 1.0, 3.0, 7.0], 1, 3).unwrap();
        let t1 = t.truncated(1).unwrap();
        assert_eq!(t1.neighbors(3), &[2]);
        assert_eq!(t1.distances(3), &[4.0]);
    }
}
