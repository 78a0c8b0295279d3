//! Lanczos iteration with full reorthogonalization for the eigenpairs of
//! largest magnitude of a symmetric operator.
//!
//! The Krylov basis is extended until every wanted Ritz pair has residual
//! `|beta_m * s_m| <= tol`; at dimension `n` the decomposition is exact.
//! If the recurrence breaks down (an invariant subspace is found) the basis
//! continues from a fresh vector orthogonal to everything so far, which
//! makes the tridiagonal matrix block diagonal but keeps the residual test
//! valid.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub(crate) struct EigenPairs {
    /// Ordered by descending magnitude, ties by descending value.
    pub values: Vec<f64>,
    /// One unit vector of length `n` per value.
    pub vectors: Vec<Vec<f64>>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn normalize(v: &mut [f64]) -> f64 {
    let norm = dot(v, v).sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
    norm
}

/// Two passes of classical Gram-Schmidt against `basis`.
fn orthogonalize(v: &mut [f64], basis: &[Vec<f64>]) {
    for _ in 0..2 {
        for q in basis {
            let c = dot(v, q);
            v.iter_mut().zip(q).for_each(|(x, y)| *x -= c * y);
        }
    }
}

fn ritz(alpha: &[f64], beta: &[f64]) -> SymmetricEigen<f64, nalgebra::Dyn> {
    let m = alpha.len();
    let t = DMatrix::from_fn(m, m, |i, j| {
        if i == j {
            alpha[i]
        } else if i + 1 == j {
            beta[i]
        } else if j + 1 == i {
            beta[j]
        } else {
            0.0
        }
    });
    SymmetricEigen::new(t)
}

fn magnitude_order(values: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| {
        values[b]
            .abs()
            .total_cmp(&values[a].abs())
            .then(values[b].total_cmp(&values[a]))
            .then(a.cmp(&b))
    });
    order
}

/// Top-`l` eigenpairs by magnitude of the symmetric `n x n` operator `apply`
/// (`apply(x, y)` writes `A x` into `y`).
pub(crate) fn lanczos<F>(n: usize, l: usize, tol: f64, seed: u64, apply: F) -> Result<EigenPairs>
where
    F: Fn(&[f64], &mut [f64]),
{
    assert!(l >= 1 && l <= n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let random_vec = |rng: &mut ChaCha8Rng| -> Vec<f64> {
        (0..n).map(|_| rng.random::<f64>() - 0.5).collect()
    };

    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut alpha: Vec<f64> = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let mut q = random_vec(&mut rng);
    normalize(&mut q);
    let mut w = vec![0.0; n];
    let mut next_check = n.min((2 * l).max(l + 30));
    let mut last_residual = f64::INFINITY;

    loop {
        apply(&q, &mut w);
        let a = dot(&w, &q);
        basis.push(std::mem::take(&mut q));
        alpha.push(a);
        let m = basis.len();
        orthogonalize(&mut w, &basis);
        let mut b = normalize(&mut w);
        let mut fresh = false;
        if m < n && b <= 1e-12 * (1.0 + a.abs()) {
            // invariant subspace: restart from a random orthogonal direction
            loop {
                let mut r = random_vec(&mut rng);
                orthogonalize(&mut r, &basis);
                if normalize(&mut r) > 1e-8 {
                    w = r;
                    break;
                }
            }
            b = 0.0;
            fresh = true;
        }

        if fresh && m == next_check && m < n {
            // a just-exhausted subspace may hide repeated copies; look further
            next_check += 1;
        } else if m == next_check || m == n {
            let eig = ritz(&alpha, &beta);
            let order = magnitude_order(eig.eigenvalues.as_slice());
            let residual = order[..l]
                .iter()
                .map(|&k| (b * eig.eigenvectors[(m - 1, k)]).abs())
                .fold(0.0, f64::max);
            last_residual = residual;
            if residual <= tol || m == n {
                if residual > tol {
                    return Err(Error::NoConvergence {
                        iterations: m,
                        residual,
                    });
                }
                let values = order[..l].iter().map(|&k| eig.eigenvalues[k]).collect();
                let vectors = order[..l]
                    .iter()
                    .map(|&k| {
                        let s = eig.eigenvectors.column(k);
                        let mut y = vec![0.0; n];
                        for (qj, sj) in basis.iter().zip(s.iter()) {
                            y.iter_mut().zip(qj).for_each(|(acc, x)| *acc += sj * x);
                        }
                        normalize(&mut y);
                        y
                    })
                    .collect();
                return Ok(EigenPairs { values, vectors });
            }
            next_check = n.min(m + (m / 2).max(20));
        }
        if m >= n {
            return Err(Error::NoConvergence {
                iterations: m,
                residual: last_residual,
            });
        }
        beta.push(b);
        q = std::mem::take(&mut w);
        w = vec![0.0; n];
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense_apply(a: &DMatrix<f64>) -> impl Fn(&[f64], &mut [f64]) + '_ {
        move |x, y| {
            for i in 0..a.nrows() {
                y[i] = (0..a.ncols()).map(|j| a[(i, j)] * x[j]).sum();
            }
        }
    }

    #[test]
    fn diagonal_matrix() {
        let a = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![0.5, -0.9, 0.1, 1.0]));
        let e = lanczos(4, 3, 1e-10, 1, dense_apply(&a)).unwrap();
        for (got, want) in e.values.iter().zip([1.0, -0.9, 0.5]) {
            assert!((got - want).abs() < 1e-12);
        }
        assert!((e.vectors[0][3].abs() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn repeated_eigenvalues_survive_breakdown() {
        // identity: the first Krylov step already spans an invariant subspace
        let a = DMatrix::<f64>::identity(5, 5);
        let e = lanczos(5, 5, 1e-10, 7, dense_apply(&a)).unwrap();
        assert!(e.values.iter().all(|v| (v - 1.0).abs() < 1e-12));
        for i in 0..5 {
            for j in 0..5 {
                let d = dot(&e.vectors[i], &e.vectors[j]);
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((d - want).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn matches_dense_solver() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 40;
        let mut a = DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let v = rng.random::<f64>() - 0.5;
                a[(i, j)] = v;
                a[(j, i)] = v;
            }
        }
        let e = lanczos(n, 6, 1e-10, 9, dense_apply(&a)).unwrap();
        let dense = SymmetricEigen::new(a.clone());
        let order = magnitude_order(dense.eigenvalues.as_slice());
        for (k, &o) in order[..6].iter().enumerate() {
            assert!((e.values[k] - dense.eigenvalues[o]).abs() < 1e-9);
        }
    }
}
