use super::knn::KnnTable;
use crate::error::{Error, Result};

/// Normalized kernel density over a point set.
///
/// `zeta[i]` is proportional to `sum_{y in kNN(i)} exp(-|x_i - y|^2 / sigma0^2)`
/// and the values sum to one.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityField {
    zeta: Vec<f64>,
    log_raw: Vec<f64>,
    sigma0: f64,
    k_n: usize,
}

impl DensityField {
    pub fn zeta(&self) -> &[f64] {
        &self.zeta
    }

    /// Natural log of the unnormalized kernel sums.
    pub fn log_raw(&self) -> &[f64] {
        &self.log_raw
    }

    pub fn sigma0(&self) -> f64 {
        self.sigma0
    }

    pub fn k_n(&self) -> usize {
        self.k_n
    }

    pub fn len(&self) -> usize {
        self.zeta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.zeta.is_empty()
    }
}

fn log_sum_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Kernel density estimate from a neighbor table.
///
/// Sums are accumulated in log space so that far-apart points keep a
/// positive density; values below `f64::MIN_POSITIVE` are clamped there.
pub fn kde(table: &KnnTable, sigma0: f64) -> Result<DensityField> {
    if !(sigma0 > 0.0 && sigma0.is_finite()) {
        return Err(Error::param(format!("sigma0 must be > 0, got {sigma0}")));
    }
    let s2 = sigma0 * sigma0;
    let log_raw: Vec<f64> = (0..table.n_points())
        .map(|i| log_sum_exp(table.distances(i).iter().map(|d| -d * d / s2)))
        .collect();
    let total = log_sum_exp(log_raw.iter().copied());
    let zeta = log_raw
        .iter()
        .map(|l| (l - total).exp().max(f64::MIN_POSITIVE))
        .collect();
    Ok(DensityField {
        zeta,
        log_raw,
        sigma0,
        k_n: table.k(),
    })
}

/// Percentiles (in `[0, 100]`, linearly interpolated) of every distance in
/// the table. Used to put `sigma0` on the scale of the data.
pub fn distance_percentiles(table: &KnnTable, percentiles: &[f64]) -> Result<Vec<f64>> {
    let mut pool = table.all_distances().to_vec();
    pool.sort_by(f64::total_cmp);
    percentiles
        .iter()
        .map(|&p| {
            if !(0.0..=100.0).contains(&p) {
                return Err(Error::param(format!("percentile {p} outside [0, 100]")));
            }
            let pos = p / 100.0 * (pool.len() - 1) as f64;
            let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
            let frac = pos - lo as f64;
            Ok(pool[lo] + (pool[hi] - pool[lo]) * frac)
        })
        .collect()
}

/// `sigma0` at a distance percentile, falling back to the smallest positive
/// distance when the percentile lands on zero (duplicate pixels). If every
/// distance is zero the estimate is uniform whatever the bandwidth, and 1 is
/// returned.
pub fn sigma0_at_percentile(table: &KnnTable, percentile: f64) -> Result<f64> {
    let s = distance_percentiles(table, &[percentile])?[0];
    if s > 0.0 {
        return Ok(s);
    }
    table
        .all_distances()
        .iter()
        .copied()
        .filter(|&d| d > 0.0)
        .fold(None, |m: Option<f64>, d| Some(m.map_or(d, |m| m.min(d))))
        .map_or(Ok(1.0), Ok)
}

#[cfg(test)]
mod tests {
    use super::super::knn::knn_index;
    use super::*;

    #[test]
    fn identical_pair_is_uniform() {
        let t = knn_index(&[2.0, 2.0], 1, 1).unwrap();
        let d = kde(&t, 1.0).unwrap();
        assert_eq!(d.zeta(), &[0.5, 0.5]);
    }

    #[test]
    fn three_points_direct_formula() {
        let t = knn_index(&[0.0, 1.0, 10.0], 1, 1).unwrap();
        let d = kde(&t, 1.0).unwrap();
        let raw = [(-1.0f64).exp(), (-1.0f64).exp(), (-81.0f64).exp()];
        let z: f64 = raw.iter().sum();
        for (got, r) in d.zeta().iter().zip(raw) {
            assert!((got - r / z).abs() < 1e-15, "{got} vs {}", r / z);
        }
    }

    #[test]
    fn scale_invariance() {
        let pts = [0.0, 0.3, 1.1, 2.0, 2.2, 5.0];
        let scaled: Vec<f64> = pts.iter().map(|p| p * 7.5).collect();
        let a = kde(&knn_index(&pts, 1, 2).unwrap(), 0.8).unwrap();
        let b = kde(&knn_index(&scaled, 1, 2).unwrap(), 0.8 * 7.5).unwrap();
        for (x, y) in a.zeta().iter().zip(b.zeta()) {
            assert!((x - y).abs() < 1e-14);
        }
    }

    #[test]
    fn far_points_stay_positive() {
        let t = knn_index(&[0.0, 1.0, 1e6], 1, 1).unwrap();
        let d = kde(&t, 1.0).unwrap();
        assert!(d.zeta().iter().all(|&z| z > 0.0));
        assert!((d.zeta().iter().sum::<f64>() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn rejects_bad_sigma() {
        let t = knn_index(&[0.0, 1.0], 1, 1).unwrap();
        assert!(kde(&t, 0.0).is_err());
        assert!(kde(&t, -1.0).is_err());
    }

    #[test]
    fn zero_distances_fall_back() {
        let t = knn_index(&[1.0, 1.0, 1.0, 4.0, 4.0, 4.0], 1, 1).unwrap();
        assert_eq!(sigma0_at_percentile(&t, 50.0).unwrap(), 1.0);
        let t = knn_index(&[1.0, 1.0, 1.0, 3.0], 1, 1).unwrap();
        assert_eq!(sigma0_at_percentile(&t, 10.0).unwrap(), 2.0);
    }

    #[test]
    fn percentiles_interpolate() {
        // distances: 1, 1, 2, 3 (points 0,1,3,6 with k = 1)
        let t = knn_index(&[0.0, 1.0, 3.0, 6.0], 1, 1).unwrap();
        let p = distance_percentiles(&t, &[0.0, 50.0, 100.0]).unwrap();
        assert_eq!(p, vec![1.0, 1.5, 3.0]);
        assert!(distance_percentiles(&t, &[101.0]).is_err());
    }
}
