use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative pivot floor used by [`TridiagonalMatrix::solve`].
pub const PIVOT_FLOOR: f64 = 1e-14;

/// Square tridiagonal matrix stored by diagonals.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TridiagonalMatrix {
    pub diag: Vec<Complex64>,
    /// Entries `(i + 1, i)`.
    pub sub: Vec<Complex64>,
    /// Entries `(i, i + 1)`.
    pub sup: Vec<Complex64>,
}

impl TridiagonalMatrix {
    pub fn new(diag: Vec<Complex64>, sub: Vec<Complex64>, sup: Vec<Complex64>) -> Result<Self> {
        let n = diag.len();
        if n == 0 || sub.len() + 1 != n || sup.len() + 1 != n {
            return Err(Error::Shape(format!(
                "tridiagonal lengths diag={n}, sub={}, sup={}",
                sub.len(),
                sup.len()
            )));
        }
        Ok(Self { diag, sub, sup })
    }

    pub fn identity(n: usize) -> Self {
        let one = Complex64::new(1.0, 0.0);
        let zero = Complex64::new(0.0, 0.0);
        Self {
            diag: vec![one; n],
            sub: vec![zero; n.saturating_sub(1)],
            sup: vec![zero; n.saturating_sub(1)],
        }
    }

    pub fn size(&self) -> usize {
        self.diag.len()
    }

    pub fn max_abs(&self) -> f64 {
        self.diag
            .iter()
            .chain(&self.sub)
            .chain(&self.sup)
            .map(|c| c.norm())
            .fold(0.0, f64::max)
    }

    /// `self - lambda * other`.
    pub fn pencil(&self, other: &Self, lambda: Complex64) -> Result<Self> {
        if self.size() != other.size() {
            return Err(Error::Shape("pencil operands differ in size".into()));
        }
        let comb = |a: &[Complex64], b: &[Complex64]| -> Vec<Complex64> {
            a.iter().zip(b).map(|(x, y)| x - lambda * y).collect()
        };
        Ok(Self {
            diag: comb(&self.diag, &other.diag),
            sub: comb(&self.sub, &other.sub),
            sup: comb(&self.sup, &other.sup),
        })
    }

    pub fn mul_vec(&self, x: &[Complex64]) -> Vec<Complex64> {
        let n = self.size();
        (0..n)
            .map(|i| {
                let mut v = self.diag[i] * x[i];
                if i > 0 {
                    v += self.sub[i - 1] * x[i - 1];
                }
                if i + 1 < n {
                    v += self.sup[i] * x[i + 1];
                }
                v
            })
            .collect()
    }

    pub fn to_dense(&self) -> DMatrix<Complex64> {
        let n = self.size();
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = self.diag[i];
            if i + 1 < n {
                m[(i + 1, i)] = self.sub[i];
                m[(i, i + 1)] = self.sup[i];
            }
        }
        m
    }

    /// Submatrix on rows/columns `lo..=hi`.
    pub fn window(&self, lo: usize, hi: usize) -> Self {
        Self {
            diag: self.diag[lo..=hi].to_vec(),
            sub: self.sub[lo..hi].to_vec(),
            sup: self.sup[lo..hi].to_vec(),
        }
    }

    /// Gaussian elimination with partial pivoting (the `gtsv` scheme).
    pub fn solve(&self, rhs: &[Complex64]) -> Result<Vec<Complex64>> {
        self.solve_with_floor(rhs, PIVOT_FLOOR * self.max_abs())
    }

    pub fn solve_with_floor(&self, rhs: &[Complex64], floor: f64) -> Result<Vec<Complex64>> {
        let n = self.size();
        if rhs.len() != n {
            return Err(Error::Shape(format!("rhs length {} for size {n}", rhs.len())));
        }
        let mut d = self.diag.clone();
        let mut du = self.sup.clone();
        let mut dl = self.sub.clone();
        // second superdiagonal produced by row interchanges
        let mut du2 = vec![Complex64::new(0.0, 0.0); n.saturating_sub(2)];
        let mut b = rhs.to_vec();
        let singular = |pivot: Complex64| Error::SingularMatrix {
            pivot: pivot.norm(),
            floor,
        };

        for i in 0..n.saturating_sub(1) {
            if d[i].norm() >= dl[i].norm() {
                if d[i].norm() <= floor {
                    return Err(singular(d[i]));
                }
                let fact = dl[i] / d[i];
                d[i + 1] -= fact * du[i];
                b[i + 1] = b[i + 1] - fact * b[i];
            } else {
                let fact = d[i] / dl[i];
                d[i] = dl[i];
                let tmp = d[i + 1];
                d[i + 1] = du[i] - fact * tmp;
                if i + 2 < n {
                    du2[i] = du[i + 1];
                    du[i + 1] = -fact * du2[i];
                }
                du[i] = tmp;
                let bi = b[i];
                b[i] = b[i + 1];
                b[i + 1] = bi - fact * b[i + 1];
            }
            dl[i] = Complex64::new(0.0, 0.0);
        }
        if d[n - 1].norm() <= floor {
            return Err(singular(d[n - 1]));
        }

        let mut x = vec![Complex64::new(0.0, 0.0); n];
        for i in (0..n).rev() {
            let mut v = b[i];
            if i + 1 < n {
                v -= du[i] * x[i + 1];
            }
            if i + 2 < n {
                v -= du2[i] * x[i + 2];
            }
            x[i] = v / d[i];
        }
        Ok(x)
    }
}

/// Solve `a x = rhs` for tridiagonal `a`.
pub fn tridiag_solve(a: &TridiagonalMatrix, rhs: &[Complex64]) -> Result<Vec<Complex64>> {
    a.solve(rhs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn scalar_solve() {
        let a = TridiagonalMatrix::new(vec![c(2.0)], vec![], vec![]).unwrap();
        assert_eq!(tridiag_solve(&a, &[c(1.0)]).unwrap(), vec![c(0.5)]);
    }

    #[test]
    fn two_by_two_inverse() {
        let a = TridiagonalMatrix::new(vec![c(2.0), c(1.0)], vec![c(1.0)], vec![c(1.0)]).unwrap();
        let x = tridiag_solve(&a, &[c(1.0), c(0.0)]).unwrap();
        assert!((x[0] - c(1.0)).norm() < 1e-15);
        assert!((x[1] - c(-1.0)).norm() < 1e-15);
    }

    #[test]
    fn identity_solve() {
        let a = TridiagonalMatrix::identity(5);
        let mut e2 = vec![c(0.0); 5];
        e2[2] = c(1.0);
        assert_eq!(tridiag_solve(&a, &e2).unwrap(), e2);
    }

    #[test]
    fn pivoting_handles_zero_diagonal() {
        // [[0,1],[1,0]] requires a row swap
        let a = TridiagonalMatrix::new(vec![c(0.0), c(0.0)], vec![c(1.0)], vec![c(1.0)]).unwrap();
        let x = tridiag_solve(&a, &[c(3.0), c(4.0)]).unwrap();
        assert_eq!(x, vec![c(4.0), c(3.0)]);
    }

    #[test]
    fn singular_matrix_detected() {
        let a = TridiagonalMatrix::new(vec![c(1.0), c(1.0)], vec![c(1.0)], vec![c(1.0)]).unwrap();
        assert!(matches!(
            tridiag_solve(&a, &[c(1.0), c(0.0)]),
            Err(Error::SingularMatrix { .. })
        ));
    }

    #[test]
    fn shape_checked() {
        assert!(TridiagonalMatrix::new(vec![c(1.0); 3], vec![c(1.0)], vec![c(1.0); 2]).is_err());
    }
}
