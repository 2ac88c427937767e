use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Dense complex matrix.
pub type DenseMatrix = DMatrix<Complex64>;

/// Entry asymmetry tolerated by [`sym_eigs`], relative to the largest entry.
pub const HERMITIAN_TOL: f64 = 1e-12;

/// Determinant by LU with partial pivoting. Singular matrices give zero (up to roundoff).
pub fn dense_det(a: &DenseMatrix) -> Result<Complex64> {
    if !a.is_square() {
        return Err(Error::Shape(format!(
            "determinant of a {}x{} matrix",
            a.nrows(),
            a.ncols()
        )));
    }
    if a.nrows() == 0 {
        return Ok(Complex64::new(1.0, 0.0));
    }
    Ok(a.clone().lu().determinant())
}

/// Largest `|a_ij - conj(a_ji)|` relative to the largest entry.
pub fn hermitian_defect(a: &DenseMatrix) -> f64 {
    let scale = a.iter().map(|c| c.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let n = a.nrows();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in 0..=i {
            worst = worst.max((a[(i, j)] - a[(j, i)].conj()).norm());
        }
    }
    worst / scale
}

/// Ascending eigenvalues of a Hermitian matrix.
pub fn sym_eigs(a: &DenseMatrix) -> Result<Vec<f64>> {
    Ok(hermitian_eigen(a)?.0)
}

/// Ascending eigenvalues with the matching unit eigenvectors (as columns).
pub fn hermitian_eigen(a: &DenseMatrix) -> Result<(Vec<f64>, DenseMatrix)> {
    if !a.is_square() {
        return Err(Error::Shape("eigenvalues of a non-square matrix".into()));
    }
    let asymmetry = hermitian_defect(a);
    if asymmetry > HERMITIAN_TOL {
        return Err(Error::NotHermitian { asymmetry });
    }
    let eig = a.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..a.nrows()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(a.nrows(), a.ncols(), |r, c| eig.eigenvectors[(r, order[c])]);
    Ok((values, vectors))
}

/// `(a + a^H) / 2`.
pub fn hermitian_part(a: &DenseMatrix) -> DenseMatrix {
    (a + a.adjoint()).scale(0.5)
}
