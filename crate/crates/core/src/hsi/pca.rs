use nalgebra::{DMatrix, SymmetricEigen};

use super::cube::HsiCube;
use crate::error::{Error, Result};

/// Rows per block when accumulating the band covariance.
const COV_BLOCK: usize = 4096;

/// Principal-component projection of a cube's spectra.
#[derive(Debug, Clone, PartialEq)]
pub struct PcaProjection {
    height: usize,
    width: usize,
    n_components: usize,
    /// `n_components` rows of length `bands`, orthonormal.
    components: Vec<Vec<f64>>,
    eigenvalues: Vec<f64>,
    total_variance: f64,
    mean: Vec<f64>,
    /// `n_pixels x n_components`, row-major.
    projected: Vec<f64>,
}

impl PcaProjection {
    pub fn n_components(&self) -> usize {
        self.n_components
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn n_pixels(&self) -> usize {
        self.height * self.width
    }

    pub fn components(&self) -> &[Vec<f64>] {
        &self.components
    }

    /// Covariance eigenvalues of the retained components, descending.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Trace of the band covariance.
    pub fn total_variance(&self) -> f64 {
        self.total_variance
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn projected(&self) -> &[f64] {
        &self.projected
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let n = self.n_components();
        &self.projected[i * n..(i + 1) * n]
    }

    /// Builds a projection from precomputed scores, e.g. to feed hand-made
    /// features to the superpixel stage. Components and mean are left empty.
    pub fn from_scores(
        height: usize,
        width: usize,
        n_components: usize,
        scores: Vec<f64>,
    ) -> Result<Self> {
        if scores.len() != height * width * n_components || n_components == 0 {
            return Err(Error::Dimension(format!(
                "{} scores do not fill {height}x{width}x{n_components}",
                scores.len()
            )));
        }
        Ok(Self {
            height,
            width,
            n_components,
            components: Vec::new(),
            eigenvalues: Vec::new(),
            total_variance: 0.0,
            mean: Vec::new(),
            projected: scores,
        })
    }

    /// Returns a copy whose scores are affinely mapped, jointly over all
    /// components, onto `[0, 255]`.
    pub fn rescaled_to_byte_range(&self) -> Self {
        let (lo, hi) = self
            .projected
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            });
        let span = hi - lo;
        let mut out = self.clone();
        if span > 0.0 {
            for v in &mut out.projected {
                *v = (*v - lo) / span * 255.0;
            }
        } else {
            out.projected.iter_mut().for_each(|v| *v = 0.0);
        }
        out
    }
}

/// Projects every pixel onto the top `n_components` eigenvectors of the band
/// covariance of the mean-centered (unscaled) spectra.
///
/// Each component is oriented so that its entry of largest magnitude is
/// positive, which makes the output reproducible.
pub fn pca_project(cube: &HsiCube, n_components: usize) -> Result<PcaProjection> {
    let (n, bands) = (cube.n_pixels(), cube.bands());
    if n_components == 0 || n_components > bands {
        return Err(Error::param(format!(
            "n_components must be in 1..={bands}, got {n_components}"
        )));
    }
    if n < 2 {
        return Err(Error::param("PCA needs at least two pixels"));
    }

    let mut mean = vec![0.0; bands];
    for i in 0..n {
        for (m, v) in mean.iter_mut().zip(cube.pixel(i)) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);

    let mut cov = DMatrix::<f64>::zeros(bands, bands);
    for start in (0..n).step_by(COV_BLOCK) {
        let rows = COV_BLOCK.min(n - start);
        let block = DMatrix::from_fn(rows, bands, |r, b| cube.pixel(start + r)[b] - mean[b]);
        cov += block.tr_mul(&block);
    }
    cov /= (n - 1) as f64;
    let total_variance = cov.trace();

    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..bands).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .total_cmp(&eig.eigenvalues[a])
            .then(a.cmp(&b))
    });
    let largest = eig.eigenvalues[order[0]].max(0.0);
    let tol = largest * 1e-10;
    let nonzero = order
        .iter()
        .filter(|&&k| largest > 0.0 && eig.eigenvalues[k] > tol)
        .count();
    if nonzero < n_components {
        return Err(Error::RankDeficient {
            requested: n_components,
            found: nonzero,
        });
    }

    let components: Vec<Vec<f64>> = order[..n_components]
        .iter()
        .map(|&k| {
            let mut v: Vec<f64> = eig.eigenvectors.column(k).iter().copied().collect();
            orient(&mut v);
            v
        })
        .collect();
    let eigenvalues = order[..n_components]
        .iter()
        .map(|&k| eig.eigenvalues[k])
        .collect();

    let mut projected = Vec::with_capacity(n * n_components);
    let mut centered = vec![0.0; bands];
    for i in 0..n {
        for ((c, x), m) in centered.iter_mut().zip(cube.pixel(i)).zip(&mean) {
            *c = x - m;
        }
        for comp in &components {
            projected.push(comp.iter().zip(&centered).map(|(a, b)| a * b).sum());
        }
    }

    Ok(PcaProjection {
        height: cube.height(),
        width: cube.width(),
        n_components,
        components,
        eigenvalues,
        total_variance,
        mean,
        projected,
    })
}

/// Flips `v` so that its first entry of largest magnitude is positive.
pub(crate) fn orient(v: &mut [f64]) {
    let mut best = 0;
    for (k, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = k;
        }
    }
    if v.get(best).is_some_and(|&x| x < 0.0) {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cube_from_pixels(h: usize, w: usize, pixels: &[&[f64]]) -> HsiCube {
        let bands = pixels[0].len();
        HsiCube::new(h, w, bands, pixels.concat()).unwrap()
    }

    #[test]
    fn single_axis_variance() {
        let cube = cube_from_pixels(
            2,
            2,
            &[
                &[1.0, 0.0, 0.0],
                &[-1.0, 0.0, 0.0],
                &[2.0, 0.0, 0.0],
                &[-2.0, 0.0, 0.0],
            ],
        );
        let pca = pca_project(&cube, 1).unwrap();
        assert_eq!(pca.components()[0], vec![1.0, 0.0, 0.0]);
        assert_eq!(pca.projected(), &[1.0, -1.0, 2.0, -2.0]);

        let err = pca_project(&cube, 2).unwrap_err();
        assert!(matches!(
            err,
            Error::RankDeficient {
                requested: 2,
                found: 1
            }
        ));
    }

    #[test]
    fn too_many_components() {
        let cube = cube_from_pixels(1, 2, &[&[1.0, 2.0], &[3.0, 1.0]]);
        assert!(pca_project(&cube, 3).is_err());
    }

    #[test]
    fn orient_flips_negative_peak() {
        let mut v = vec![0.3, -0.9, 0.1];
        orient(&mut v);
        assert_eq!(v, vec![-0.3, 0.9, -0.1]);
    }

    #[test]
    fn byte_rescale_spans_range() {
        let pca = PcaProjection::from_scores(1, 3, 1, vec![-2.0, 0.0, 2.0]).unwrap();
        assert_eq!(pca.rescaled_to_byte_range().projected(), &[0.0, 127.5, 255.0]);
    }
}
