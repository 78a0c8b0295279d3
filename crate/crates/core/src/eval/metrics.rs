use super::hungarian::max_weight_assignment;
use crate::error::{Error, Result};
use crate::hsi::GroundTruth;

/// Counts of (predicted row, true column) over pixels with a true label.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    rows: usize,
    cols: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn from_counts(rows: usize, cols: usize, counts: Vec<u64>) -> Result<Self> {
        if counts.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "{} counts for a {rows}x{cols} matrix",
                counts.len()
            )));
        }
        Ok(Self { rows, cols, counts })
    }

    /// Tallies `pred` (labels `1..`) against `gt`, skipping unlabeled pixels.
    pub fn tally(pred: &[u32], gt: &GroundTruth) -> Result<Self> {
        let truth = gt.labels();
        if pred.len() != truth.len() {
            return Err(Error::Dimension(format!(
                "{} predictions for {} ground-truth pixels",
                pred.len(),
                truth.len()
            )));
        }
        if gt.n_labeled() == 0 {
            return Err(Error::EmptyGroundTruth);
        }
        let rows = pred.iter().copied().max().unwrap_or(0) as usize;
        let cols = gt.n_classes();
        let mut counts = vec![0u64; rows * cols];
        for (i, (&p, &g)) in pred.iter().zip(truth).enumerate() {
            if g == 0 {
                continue;
            }
            if p == 0 {
                return Err(Error::param(format!("pixel {i} has no predicted label")));
            }
            counts[(p as usize - 1) * cols + g as usize - 1] += 1;
        }
        Ok(Self { rows, cols, counts })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> u64 {
        self.counts[r * self.cols + c]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Rows reordered so that row `c` holds the predicted cluster matched to
    /// class `c`. Classes without a cluster get a zero row; unmatched
    /// clusters trail after the classes.
    pub fn aligned(&self, alignment: &Alignment) -> Self {
        let m = self.rows.max(self.cols);
        let mut counts = vec![0u64; m * self.cols];
        for (r, &slot) in alignment.slot_of_cluster.iter().enumerate() {
            for col in 0..self.cols {
                counts[slot * self.cols + col] = self.get(r, col);
            }
        }
        Self {
            rows: m,
            cols: self.cols,
            counts,
        }
    }
}

/// One-to-one matching of predicted clusters to classes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Alignment {
    /// Row slot of each predicted cluster in the aligned matrix; slots
    /// `< n_classes` mean "matched to class `slot + 1`".
    slot_of_cluster: Vec<usize>,
    n_classes: usize,
}

impl Alignment {
    /// Class matched to predicted label `p` (both 1-based), if any.
    pub fn class_of(&self, p: u32) -> Option<u32> {
        let slot = *self.slot_of_cluster.get(p as usize - 1)?;
        (slot < self.n_classes).then_some(slot as u32 + 1)
    }

    /// Rewrites predicted labels into class ids; unmatched clusters map to 0.
    pub fn apply(&self, pred: &[u32]) -> Vec<u32> {
        pred.iter()
            .map(|&p| if p == 0 { 0 } else { self.class_of(p).unwrap_or(0) })
            .collect()
    }

    pub fn pairs(&self) -> Vec<(u32, Option<u32>)> {
        (1..=self.slot_of_cluster.len() as u32)
            .map(|p| (p, self.class_of(p)))
            .collect()
    }
}

/// Matches clusters to classes maximizing the number of agreeing pixels.
pub fn align_labels(pred: &[u32], gt: &GroundTruth) -> Result<(Alignment, ConfusionMatrix)> {
    let conf = ConfusionMatrix::tally(pred, gt)?;
    let alignment = align_confusion(&conf);
    Ok((alignment, conf))
}

/// Optimal assignment on a confusion matrix padded to square.
///
/// Rows are fed to the solver sorted by their counts, so when several
/// assignments tie the pick depends only on the matrix contents and not on
/// how the clusters happen to be numbered.
pub fn align_confusion(conf: &ConfusionMatrix) -> Alignment {
    let m = conf.rows.max(conf.cols);
    let row = |r: usize| &conf.counts[r * conf.cols..(r + 1) * conf.cols];
    let mut order: Vec<usize> = (0..conf.rows).collect();
    order.sort_by(|&a, &b| row(b).cmp(row(a)).then(a.cmp(&b)));
    let mut w = vec![0i64; m * m];
    for (slot, &r) in order.iter().enumerate() {
        for c in 0..conf.cols {
            w[slot * m + c] = conf.get(r, c) as i64;
        }
    }
    let col_of = max_weight_assignment(m, &w);
    let mut slot_of_cluster = vec![0; conf.rows];
    for (slot, &r) in order.iter().enumerate() {
        slot_of_cluster[r] = col_of[slot];
    }
    Alignment {
        slot_of_cluster,
        n_classes: conf.cols,
    }
}

/// Accuracy summary.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub oa: f64,
    pub aa: f64,
    pub kappa: f64,
    /// Per class; `None` for classes without pixels.
    pub producers: Vec<Option<f64>>,
    pub runtime_s: f64,
}

impl MetricsReport {
    /// Model-selection score: OA + AA + kappa.
    pub fn objective(&self) -> f64 {
        self.oa + self.aa + self.kappa
    }
}

/// OA, AA, kappa and producer's accuracies of an (already aligned) matrix:
/// the diagonal counts as agreement, columns are the true classes.
pub fn metrics(conf: &ConfusionMatrix, runtime_s: f64) -> Result<MetricsReport> {
    let total = conf.total();
    if total == 0 {
        return Err(Error::EmptyGroundTruth);
    }
    let t = total as f64;
    let diag = |c: usize| if c < conf.rows { conf.get(c, c) } else { 0 };
    let row_total = |r: usize| -> u64 {
        if r < conf.rows {
            (0..conf.cols).map(|c| conf.get(r, c)).sum()
        } else {
            0
        }
    };
    let col_total = |c: usize| -> u64 { (0..conf.rows).map(|r| conf.get(r, c)).sum() };

    let trace: u64 = (0..conf.rows.min(conf.cols)).map(diag).sum();
    let oa = trace as f64 / t;
    let producers: Vec<Option<f64>> = (0..conf.cols)
        .map(|c| {
            let ct = col_total(c);
            (ct > 0).then(|| diag(c) as f64 / ct as f64)
        })
        .collect();
    let present: Vec<f64> = producers.iter().flatten().copied().collect();
    let aa = present.iter().sum::<f64>() / present.len() as f64;
    let pe: f64 = (0..conf.cols)
        .map(|c| row_total(c) as f64 * col_total(c) as f64)
        .sum::<f64>()
        / (t * t);
    let kappa = if 1.0 - pe == 0.0 {
        if trace == total {
            1.0
        } else {
            0.0
        }
    } else {
        (oa - pe) / (1.0 - pe)
    };
    Ok(MetricsReport {
        oa,
        aa,
        kappa,
        producers,
        runtime_s,
    })
}

/// Aligns `pred` to `gt` and scores it.
pub fn evaluate(pred: &[u32], gt: &GroundTruth, runtime_s: f64) -> Result<(MetricsReport, Alignment)> {
    let (alignment, conf) = align_labels(pred, gt)?;
    let report = metrics(&conf.aligned(&alignment), runtime_s)?;
    Ok((report, alignment))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gt(labels: &[u32]) -> GroundTruth {
        GroundTruth::new(1, labels.len(), labels.to_vec()).unwrap()
    }

    #[test]
    fn diagonal_is_perfect() {
        let c = ConfusionMatrix::from_counts(2, 2, vec![10, 0, 0, 5]).unwrap();
        let m = metrics(&c, 0.0).unwrap();
        assert_eq!((m.oa, m.aa, m.kappa), (1.0, 1.0, 1.0));
    }

    #[test]
    fn kappa_fixture() {
        let c = ConfusionMatrix::from_counts(2, 2, vec![25, 5, 10, 60]).unwrap();
        let m = metrics(&c, 0.0).unwrap();
        assert_eq!(m.oa, 0.85);
        let pe = (30.0 * 35.0 + 70.0 * 65.0) / 10_000.0;
        assert_eq!(m.kappa, (0.85 - pe) / (1.0 - pe));
        assert!((m.kappa - 0.659_090_909_090_909).abs() < 1e-12);
    }

    #[test]
    fn chance_agreement() {
        let c = ConfusionMatrix::from_counts(2, 2, vec![25, 25, 25, 25]).unwrap();
        let m = metrics(&c, 0.0).unwrap();
        assert_eq!((m.oa, m.kappa), (0.5, 0.0));
    }

    #[test]
    fn degenerate_chance_convention() {
        // a single class predicted as a single cluster: p_e = 1
        let c = ConfusionMatrix::from_counts(1, 1, vec![7]).unwrap();
        assert_eq!(metrics(&c, 0.0).unwrap().kappa, 1.0);
    }

    #[test]
    fn swapped_labels_align() {
        let truth = gt(&[1, 1, 2, 2, 0]);
        let (m, a) = evaluate(&[2, 2, 1, 1, 1], &truth, 0.0).unwrap();
        assert_eq!(m.oa, 1.0);
        assert_eq!(a.class_of(1), Some(2));
        assert_eq!(a.apply(&[1, 2]), vec![2, 1]);
    }

    #[test]
    fn extra_clusters_count_as_errors() {
        let truth = gt(&[1, 1, 2, 2, 2]);
        let (m, a) = evaluate(&[1, 1, 2, 2, 3], &truth, 0.0).unwrap();
        assert_eq!(m.oa, 0.8);
        assert_eq!(a.class_of(3), None);
        assert_eq!(m.producers, vec![Some(1.0), Some(2.0 / 3.0)]);
    }

    #[test]
    fn empty_truth_rejected() {
        let truth = gt(&[0, 0]);
        assert!(matches!(
            align_labels(&[1, 1], &truth),
            Err(Error::EmptyGroundTruth)
        ));
    }
}
