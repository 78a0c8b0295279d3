//! Synthetic piecewise-constant scenes with Gaussian noise, used as test
//! fixtures and as a stand-in when benchmark cubes are unavailable.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::cube::{GroundTruth, HsiCube};
use crate::error::{Error, Result};

/// An axis-aligned rectangle of pixels sharing one mean spectrum.
#[derive(Debug, Clone, PartialEq)]
pub struct Patch {
    pub row: usize,
    pub col: usize,
    pub height: usize,
    pub width: usize,
    pub spectrum: Vec<f64>,
}

/// Lattice size plus the patches that tile it. Patch `k` becomes class `k + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneSpec {
    pub height: usize,
    pub width: usize,
    pub patches: Vec<Patch>,
}

impl SceneSpec {
    /// Splits the lattice into a `grid_rows x grid_cols` grid of patches with
    /// random spectra drawn uniformly from `[0, 1]` per band. Leftover rows and
    /// columns go to the last patch of each axis.
    pub fn grid(
        height: usize,
        width: usize,
        grid_rows: usize,
        grid_cols: usize,
        bands: usize,
        seed: u64,
    ) -> Result<Self> {
        if grid_rows == 0 || grid_cols == 0 || grid_rows > height || grid_cols > width {
            return Err(Error::param(format!(
                "cannot split {height}x{width} into a {grid_rows}x{grid_cols} grid"
            )));
        }
        if bands == 0 {
            return Err(Error::param("bands must be positive"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_5eed_5eed_5eed);
        let (ph, pw) = (height / grid_rows, width / grid_cols);
        let mut patches = Vec::with_capacity(grid_rows * grid_cols);
        for gr in 0..grid_rows {
            for gc in 0..grid_cols {
                let row = gr * ph;
                let col = gc * pw;
                let h = if gr + 1 == grid_rows { height - row } else { ph };
                let w = if gc + 1 == grid_cols { width - col } else { pw };
                let spectrum = (0..bands).map(|_| rng.random::<f64>()).collect();
                patches.push(Patch {
                    row,
                    col,
                    height: h,
                    width: w,
                    spectrum,
                });
            }
        }
        Ok(Self {
            height,
            width,
            patches,
        })
    }

    /// Two patches splitting the lattice into left and right halves.
    pub fn halves(height: usize, width: usize, left: Vec<f64>, right: Vec<f64>) -> Self {
        let split = width / 2;
        Self {
            height,
            width,
            patches: vec![
                Patch {
                    row: 0,
                    col: 0,
                    height,
                    width: split,
                    spectrum: left,
                },
                Patch {
                    row: 0,
                    col: split,
                    height,
                    width: width - split,
                    spectrum: right,
                },
            ],
        }
    }
}

/// Renders `scene` with i.i.d. `N(0, noise_sigma^2)` noise on every value.
///
/// The output is a deterministic function of `seed`.
pub fn synth_cube(scene: &SceneSpec, seed: u64, noise_sigma: f64) -> Result<(HsiCube, GroundTruth)> {
    if !(noise_sigma >= 0.0 && noise_sigma.is_finite()) {
        return Err(Error::param(format!(
            "noise_sigma must be finite and >= 0, got {noise_sigma}"
        )));
    }
    let (height, width) = (scene.height, scene.width);
    let first = scene
        .patches
        .first()
        .ok_or_else(|| Error::param("scene has no patches"))?;
    let bands = first.spectrum.len();
    if bands == 0 {
        return Err(Error::param("patch spectra must be nonempty"));
    }

    let mut owner = vec![0u32; height * width];
    for (k, p) in scene.patches.iter().enumerate() {
        if p.spectrum.len() != bands {
            return Err(Error::param(format!(
                "patch {k} has {} bands, expected {bands}",
                p.spectrum.len()
            )));
        }
        if scene.patches[..k].iter().any(|q| q.spectrum == p.spectrum) {
            return Err(Error::param(format!("patch {k} repeats an earlier spectrum")));
        }
        if p.height == 0 || p.width == 0 || p.row + p.height > height || p.col + p.width > width {
            return Err(Error::param(format!("patch {k} lies outside the lattice")));
        }
        for r in p.row..p.row + p.height {
            for c in p.col..p.col + p.width {
                let slot = &mut owner[r * width + c];
                if *slot != 0 {
                    return Err(Error::OverlappingPatches { row: r, col: c });
                }
                *slot = k as u32 + 1;
            }
        }
    }
    if let Some(i) = owner.iter().position(|&o| o == 0) {
        return Err(Error::param(format!(
            "patches do not tile the lattice: pixel ({}, {}) is uncovered",
            i / width,
            i % width
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, noise_sigma).map_err(|e| Error::param(e.to_string()))?;
    let mut values = Vec::with_capacity(height * width * bands);
    for &o in &owner {
        let spectrum = &scene.patches[o as usize - 1].spectrum;
        for &s in spectrum {
            let eps = if noise_sigma > 0.0 {
                noise.sample(&mut rng)
            } else {
                0.0
            };
            values.push(s + eps);
        }
    }
    let cube = HsiCube::new(height, width, bands, values)?;
    let gt = GroundTruth::new(height, width, owner)?;
    Ok((cube, gt))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noiseless_halves_are_exact() {
        let scene = SceneSpec::halves(3, 4, vec![1.0, 2.0], vec![5.0, -1.0]);
        let (cube, gt) = synth_cube(&scene, 7, 0.0).unwrap();
        for i in 0..cube.n_pixels() {
            let expected: &[f64] = if i % 4 < 2 { &[1.0, 2.0] } else { &[5.0, -1.0] };
            assert_eq!(cube.pixel(i), expected);
            assert_eq!(gt.labels()[i], if i % 4 < 2 { 1 } else { 2 });
        }
    }

    #[test]
    fn same_seed_same_bits() {
        let scene = SceneSpec::grid(10, 10, 2, 2, 5, 3).unwrap();
        let (a, _) = synth_cube(&scene, 11, 0.3).unwrap();
        let (b, _) = synth_cube(&scene, 11, 0.3).unwrap();
        let bits = |c: &HsiCube| c.values().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a), bits(&b));
        let (c, _) = synth_cube(&scene, 12, 0.3).unwrap();
        assert_ne!(bits(&a), bits(&c));
    }

    #[test]
    fn overlap_rejected() {
        let mut scene = SceneSpec::halves(2, 2, vec![0.0], vec![1.0]);
        scene.patches[1].col = 0;
        assert!(matches!(
            synth_cube(&scene, 0, 0.0).unwrap_err(),
            Error::OverlappingPatches { row: 0, col: 0 }
        ));
    }

    #[test]
    fn gap_rejected() {
        let mut scene = SceneSpec::halves(2, 4, vec![0.0], vec![1.0]);
        scene.patches[1].width = 1;
        assert!(synth_cube(&scene, 0, 0.0).is_err());
    }

    #[test]
    fn duplicate_spectra_rejected() {
        let scene = SceneSpec::halves(2, 2, vec![1.0], vec![1.0]);
        assert!(synth_cube(&scene, 0, 0.0).is_err());
    }
}
