//! Scalar, polynomial and small-matrix arithmetic shared by the rest of the crate.

pub mod dense;
pub mod poly;
pub mod rational;
pub mod tridiag;

pub use dense::{dense_det, hermitian_eigen, sym_eigs, DenseMatrix};
pub use poly::{poly_eval, poly_roots, Polynomial};
pub use rational::{PartialFractions, RationalFunction};
pub use tridiag::{tridiag_solve, TridiagonalMatrix};

pub use num_complex::Complex64;

/// Shorthand constructor for complex scalars.
pub const fn c64(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}
