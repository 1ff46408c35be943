//! Small dense linear-algebra helpers on top of `nalgebra`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Above this order `min_symmetric_eigenvalue` switches from the dense
/// eigensolver to shifted power iteration.
pub const DENSE_EIGEN_LIMIT: usize = 2000;

pub fn max_asymmetry(a: &DMatrix<f64>) -> f64 {
    let n = a.nrows();
    let mut worst = 0.0f64;
    for j in 0..n {
        for i in (j + 1)..n {
            worst = worst.max((a[(i, j)] - a[(j, i)]).abs());
        }
    }
    worst
}

/// Relative symmetry check; the scale is the largest absolute entry.
pub fn check_symmetric(a: &DMatrix<f64>, rel_tol: f64) -> Result<()> {
    if !a.is_square() {
        return Err(Error::dim("symmetric matrix", a.nrows(), a.ncols()));
    }
    let scale = a.amax().max(f64::MIN_POSITIVE);
    let asym = max_asymmetry(a);
    if asym > rel_tol * scale {
        return Err(Error::NotSymmetric { asymmetry: asym });
    }
    Ok(())
}

fn symmetrized(a: &DMatrix<f64>) -> DMatrix<f64> {
    (a + a.transpose()) * 0.5
}

pub fn symmetric_eigenvalues(a: &DMatrix<f64>) -> DVector<f64> {
    symmetrized(a).symmetric_eigenvalues()
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_symmetric_eigenvalue(a: &DMatrix<f64>) -> f64 {
    if a.nrows() <= DENSE_EIGEN_LIMIT {
        symmetric_eigenvalues(a).min()
    } else {
        shifted_power_min(a, 1e-12, 20_000)
    }
}

pub fn max_symmetric_eigenvalue(a: &DMatrix<f64>) -> f64 {
    symmetric_eigenvalues(a).max()
}

/// Gershgorin upper bound on the spectrum.
pub fn gershgorin_max(a: &DMatrix<f64>) -> f64 {
    (0..a.nrows())
        .map(|i| {
            let row = a.row(i);
            let off: f64 = row.iter().map(|v| v.abs()).sum::<f64>() - a[(i, i)].abs();
            a[(i, i)] + off
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Power iteration on `s·I − A` with `s` a Gershgorin bound, giving `λ_min(A)`.
pub fn shifted_power_min(a: &DMatrix<f64>, tol: f64, max_iter: usize) -> f64 {
    let n = a.nrows();
    let shift = gershgorin_max(a);
    let mut v = DVector::from_fn(n, |i, _| 1.0 + (i as f64 * 0.618_033_988_7).fract());
    v /= v.norm();
    let mut mu = 0.0;
    for _ in 0..max_iter {
        let w = &v * shift - a * &v;
        let next_mu = v.dot(&w);
        let norm = w.norm();
        if norm == 0.0 {
            return shift;
        }
        v = w / norm;
        if (next_mu - mu).abs() <= tol * next_mu.abs().max(1.0) {
            mu = next_mu;
            break;
        }
        mu = next_mu;
    }
    let rayleigh = v.dot(&(a * &v));
    rayleigh.min(shift - mu)
}

/// Symmetric positive semidefinite square root; negative eigenvalues from
/// rounding are clipped to zero.
pub fn psd_sqrt(a: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(symmetrized(a));
    let roots = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    &eig.eigenvectors * DMatrix::from_diagonal(&roots) * eig.eigenvectors.transpose()
}
