use crate::error::{Error, Result};

/// A hyperspectral cube.
///
/// Values are stored pixel-interleaved: the spectrum of pixel `i` occupies
/// `values[i * bands..(i + 1) * bands]`. Pixel `i` sits at
/// `(i / width, i % width)` (row-major), and every module in the crate uses
/// that same linear index.
#[derive(Debug, Clone, PartialEq)]
pub struct HsiCube {
    height: usize,
    width: usize,
    bands: usize,
    values: Vec<f64>,
}

impl HsiCube {
    /// Builds a cube from pixel-interleaved values.
    pub fn new(height: usize, width: usize, bands: usize, values: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 || bands == 0 {
            return Err(Error::Dimension(format!(
                "cube dimensions must be positive, got {height}x{width}x{bands}"
            )));
        }
        let expected = height * width * bands;
        if values.len() != expected {
            return Err(Error::SizeMismatch {
                expected,
                found: values.len(),
            });
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                location: format!("pixel {} band {}", pos / bands, pos % bands),
            });
        }
        Ok(Self {
            height,
            width,
            bands,
            values,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn bands(&self) -> usize {
        self.bands
    }

    /// Number of pixels, `height * width`.
    pub fn n_pixels(&self) -> usize {
        self.height * self.width
    }

    pub fn pixel(&self, i: usize) -> &[f64] {
        &self.values[i * self.bands..(i + 1) * self.bands]
    }

    /// All spectra, pixel-interleaved.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, row: usize, col: usize, band: usize) -> f64 {
        self.values[(row * self.width + col) * self.bands + band]
    }

    pub fn coords(&self, i: usize) -> (usize, usize) {
        (i / self.width, i % self.width)
    }

    pub fn index(&self, row: usize, col: usize) -> usize {
        row * self.width + col
    }
}

/// Ground-truth class labels over an image lattice.
///
/// `0` marks unlabeled pixels. Class ids are compacted to `1..=n_classes` in
/// ascending order of the ids found in the source file; `class_ids` keeps the
/// original id of each compacted class.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    height: usize,
    width: usize,
    labels: Vec<u32>,
    n_classes: usize,
    class_ids: Vec<u32>,
}

impl GroundTruth {
    pub fn new(height: usize, width: usize, raw: Vec<u32>) -> Result<Self> {
        if raw.len() != height * width {
            return Err(Error::Dimension(format!(
                "label map has {} entries, expected {height}x{width}",
                raw.len()
            )));
        }
        let mut class_ids: Vec<u32> = raw.iter().copied().filter(|&l| l > 0).collect();
        class_ids.sort_unstable();
        class_ids.dedup();
        let labels = raw
            .iter()
            .map(|&l| {
                if l == 0 {
                    0
                } else {
                    class_ids.binary_search(&l).expect("present") as u32 + 1
                }
            })
            .collect();
        Ok(Self {
            height,
            width,
            labels,
            n_classes: class_ids.len(),
            class_ids,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    /// Number of ground-truth classes (0 when every pixel is unlabeled).
    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    /// Original id of each compacted class, indexed by `class - 1`.
    pub fn class_ids(&self) -> &[u32] {
        &self.class_ids
    }

    pub fn n_labeled(&self) -> usize {
        self.labels.iter().filter(|&&l| l > 0).count()
    }

    /// Checks that this map covers the same lattice as `cube`.
    pub fn check_matches(&self, cube: &HsiCube) -> Result<()> {
        if self.height != cube.height() || self.width != cube.width() {
            return Err(Error::Dimension(format!(
                "labels are {}x{} but cube is {}x{}",
                self.height,
                self.width,
                cube.height(),
                cube.width()
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_finite() {
        let err = HsiCube::new(1, 2, 1, vec![0.0, f64::NAN]).unwrap_err();
        assert!(matches!(err, Error::NonFinite { .. }));
    }

    #[test]
    fn row_major_index() {
        let cube = HsiCube::new(2, 3, 1, (0..6).map(f64::from).collect()).unwrap();
        assert_eq!(cube.coords(4), (1, 1));
        assert_eq!(cube.value(1, 2, 0), 5.0);
        assert_eq!(cube.index(1, 0), 3);
    }

    #[test]
    fn ground_truth_compacts_sparse_ids() {
        let gt = GroundTruth::new(1, 4, vec![0, 10, 3, 10]).unwrap();
        assert_eq!(gt.labels(), &[0, 2, 1, 2]);
        assert_eq!(gt.n_classes(), 2);
        assert_eq!(gt.class_ids(), &[3, 10]);
    }
}
