//! Symmetric-matrix helpers on top of nalgebra.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::{Error, Result};

/// `(A + A^T) / 2`.
pub fn symmetrize(a: &DMatrix<f64>) -> DMatrix<f64> {
    (a + a.transpose()) * 0.5
}

/// Largest absolute asymmetry `max |a_ij - a_ji|`.
pub fn asymmetry(a: &DMatrix<f64>) -> f64 {
    let n = a.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in (i + 1)..n {
            worst = worst.max((a[(i, j)] - a[(j, i)]).abs());
        }
    }
    worst
}

/// Eigendecomposition of the symmetrised matrix.
pub fn sym_eigen(a: &DMatrix<f64>) -> Result<SymmetricEigen<f64, nalgebra::Dyn>> {
    if a.iter().any(|x| !x.is_finite()) {
        return Err(Error::NotSpd("matrix has non-finite entries".into()));
    }
    Ok(SymmetricEigen::new(symmetrize(a)))
}

/// Rebuild `U f(Lambda) U^T` from an eigendecomposition.
pub fn eigen_map(
    eig: &SymmetricEigen<f64, nalgebra::Dyn>,
    f: impl Fn(f64) -> f64,
) -> DMatrix<f64> {
    let u = &eig.eigenvectors;
    let mapped = DMatrix::from_diagonal(&eig.eigenvalues.map(f));
    symmetrize(&(u * mapped * u.transpose()))
}

/// Principal square root of a positive semi-definite matrix. Eigenvalues in
/// `[-tol, 0)` are treated as round-off and mapped to zero.
pub fn psd_sqrt(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let eig = sym_eigen(a)?;
    let scale = eig.eigenvalues.iter().fold(1.0f64, |acc, v| acc.max(v.abs()));
    if let Some(bad) = eig.eigenvalues.iter().find(|&&v| v < -1e-9 * scale) {
        return Err(Error::NotSpd(format!(
            "square root of a matrix with eigenvalue {bad:e}"
        )));
    }
    Ok(eigen_map(&eig, |v| v.max(0.0).sqrt()))
}

/// Smallest and largest eigenvalue of a symmetric matrix.
pub fn eigen_extrema(a: &DMatrix<f64>) -> Result<(f64, f64)> {
    let eig = sym_eigen(a)?;
    let lo = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = eig.eigenvalues.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Ok((lo, hi))
}
