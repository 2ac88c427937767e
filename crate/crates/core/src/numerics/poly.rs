use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Dense polynomial with complex coefficients in ascending degree order.
///
/// Trailing exact zeros are trimmed, so the last stored coefficient is
/// nonzero unless the polynomial is zero (empty coefficient list).
#[derive(Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "Vec<Complex64>", into = "Vec<Complex64>")]
pub struct Polynomial {
    coeffs: Vec<Complex64>,
}

impl From<Vec<Complex64>> for Polynomial {
    fn from(coeffs: Vec<Complex64>) -> Self {
        Self::new(coeffs)
    }
}

impl From<Polynomial> for Vec<Complex64> {
    fn from(p: Polynomial) -> Self {
        p.coeffs
    }
}

impl fmt::Debug for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Polynomial{:?}", self.coeffs)
    }
}

impl Polynomial {
    pub fn new(mut coeffs: Vec<Complex64>) -> Self {
        while coeffs.last().is_some_and(|c| *c == ZERO) {
            coeffs.pop();
        }
        Self { coeffs }
    }

    pub fn from_real(coeffs: &[f64]) -> Self {
        Self::new(coeffs.iter().map(|&c| Complex64::new(c, 0.0)).collect())
    }

    pub fn zero() -> Self {
        Self { coeffs: Vec::new() }
    }

    pub fn constant(c: Complex64) -> Self {
        Self::new(vec![c])
    }

    pub fn one() -> Self {
        Self::constant(ONE)
    }

    /// `z - root`.
    pub fn linear(root: Complex64) -> Self {
        Self::new(vec![-root, ONE])
    }

    /// `(z - w)(z - conj w) = z^2 - 2 Re(w) z + |w|^2`, built with real coefficients.
    pub fn conjugate_quadratic(w: Complex64) -> Self {
        Self::from_real(&[w.norm_sqr(), -2.0 * w.re, 1.0])
    }

    /// Monic polynomial with the given roots.
    pub fn from_roots(roots: &[Complex64]) -> Self {
        roots
            .iter()
            .fold(Self::one(), |acc, &r| acc.mul_linear(r))
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn leading(&self) -> Complex64 {
        self.coeffs.last().copied().unwrap_or(ZERO)
    }

    /// Coefficient of `z^k` (zero past the degree).
    pub fn coeff(&self, k: usize) -> Complex64 {
        self.coeffs.get(k).copied().unwrap_or(ZERO)
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        self.coeffs.iter().rev().fold(ZERO, |acc, &c| acc * z + c)
    }

    /// Value and first derivative by a doubled Horner pass.
    pub fn eval_with_derivative(&self, z: Complex64) -> (Complex64, Complex64) {
        let mut p = ZERO;
        let mut dp = ZERO;
        for &c in self.coeffs.iter().rev() {
            dp = dp * z + p;
            p = p * z + c;
        }
        (p, dp)
    }

    pub fn scale(&self, s: Complex64) -> Self {
        Self::new(self.coeffs.iter().map(|&c| c * s).collect())
    }

    /// Multiply by `(z - root)`.
    pub fn mul_linear(&self, root: Complex64) -> Self {
        if self.is_zero() {
            return Self::zero();
        }
        let mut out = vec![ZERO; self.coeffs.len() + 1];
        for (k, &c) in self.coeffs.iter().enumerate() {
            out[k + 1] += c;
            out[k] -= root * c;
        }
        Self::new(out)
    }

    /// Synthetic division by `(z - root)`: returns `(quotient, remainder)`.
    pub fn div_linear(&self, root: Complex64) -> (Self, Complex64) {
        let n = self.coeffs.len();
        if n == 0 {
            return (Self::zero(), ZERO);
        }
        let mut q = vec![ZERO; n - 1];
        let mut carry = ZERO;
        for k in (0..n).rev() {
            let v = self.coeffs[k] + carry * root;
            if k == 0 {
                return (Self::new(q), v);
            }
            q[k - 1] = v;
            carry = v;
        }
        unreachable!()
    }

    pub fn monic(&self) -> Self {
        self.scale(ONE / self.leading())
    }

    /// Largest imaginary part among the coefficients relative to the largest coefficient.
    pub fn imag_residue(&self) -> f64 {
        let scale = self.max_abs_coeff().max(f64::MIN_POSITIVE);
        self.coeffs.iter().map(|c| c.im.abs()).fold(0.0, f64::max) / scale
    }

    /// Drop imaginary parts, failing if they exceed `tol` relative to the coefficient scale.
    pub fn into_real(self, tol: f64) -> Result<Self> {
        let residue = self.imag_residue();
        if residue > tol {
            return Err(Error::InvariantViolated(format!(
                "polynomial coefficients not real (imaginary residue {residue:e})"
            )));
        }
        Ok(Self::new(
            self.coeffs.iter().map(|c| Complex64::new(c.re, 0.0)).collect(),
        ))
    }

    /// All complex roots, from the eigenvalues of the companion matrix followed by
    /// Newton polishing.
    pub fn roots(&self) -> Result<Vec<Complex64>> {
        let n = match self.degree() {
            Some(d) if d >= 1 => d,
            _ => {
                return Err(Error::InvalidData(
                    "root finding needs a polynomial of degree >= 1".into(),
                ))
            }
        };
        let lead = self.leading();
        let mut companion = DMatrix::<Complex64>::zeros(n, n);
        for i in 1..n {
            companion[(i, i - 1)] = ONE;
        }
        for i in 0..n {
            companion[(i, n - 1)] = -self.coeffs[i] / lead;
        }
        let (_, t) = nalgebra::linalg::Schur::new(companion).unpack();
        let mut roots: Vec<Complex64> = (0..n).map(|i| t[(i, i)]).collect();
        for r in &mut roots {
            *r = self.polish(*r);
        }
        roots.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
        Ok(roots)
    }

    fn polish(&self, mut r: Complex64) -> Complex64 {
        let mut best = self.eval(r).norm();
        for _ in 0..3 {
            let (p, dp) = self.eval_with_derivative(r);
            if dp == ZERO {
                break;
            }
            let cand = r - p / dp;
            let val = self.eval(cand).norm();
            if val.is_finite() && val < best {
                best = val;
                r = cand;
            } else {
                break;
            }
        }
        r
    }
}

impl Add for &Polynomial {
    type Output = Polynomial;
    fn add(self, rhs: &Polynomial) -> Polynomial {
        let n = self.coeffs.len().max(rhs.coeffs.len());
        Polynomial::new((0..n).map(|k| self.coeff(k) + rhs.coeff(k)).collect())
    }
}

impl Sub for &Polynomial {
    type Output = Polynomial;
    fn sub(self, rhs: &Polynomial) -> Polynomial {
        let n = self.coeffs.len().max(rhs.coeffs.len());
        Polynomial::new((0..n).map(|k| self.coeff(k) - rhs.coeff(k)).collect())
    }
}

impl Neg for &Polynomial {
    type Output = Polynomial;
    fn neg(self) -> Polynomial {
        self.scale(-ONE)
    }
}

impl Mul for &Polynomial {
    type Output = Polynomial;
    fn mul(self, rhs: &Polynomial) -> Polynomial {
        if self.is_zero() || rhs.is_zero() {
            return Polynomial::zero();
        }
        let mut out = vec![ZERO; self.coeffs.len() + rhs.coeffs.len() - 1];
        for (i, &a) in self.coeffs.iter().enumerate() {
            for (j, &b) in rhs.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Polynomial::new(out)
    }
}

/// Horner value of `p` at `lambda`.
pub fn poly_eval(p: &Polynomial, lambda: Complex64) -> Complex64 {
    p.eval(lambda)
}

/// Roots of `p` (degree at least one).
pub fn poly_roots(p: &Polynomial) -> Result<Vec<Complex64>> {
    p.roots()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn eval_examples() {
        assert_eq!(poly_eval(&Polynomial::one(), c(7.0, 2.0)), c(1.0, 0.0));
        let z2 = Polynomial::from_real(&[0.0, 0.0, 1.0]);
        assert!((poly_eval(&z2, c(1.0, 1.0)) - c(0.0, 2.0)).norm() < 1e-15);
        let lin = Polynomial::linear(c(0.5, 0.0));
        assert_eq!(poly_eval(&lin, c(0.5, 0.0)), c(0.0, 0.0));
    }

    #[test]
    fn zero_polynomial_has_no_degree() {
        assert_eq!(Polynomial::from_real(&[0.0, 0.0]).degree(), None);
        assert_eq!(Polynomial::from_real(&[1.0, 2.0, 0.0]).degree(), Some(1));
    }

    #[test]
    fn roots_examples() {
        let r = poly_roots(&Polynomial::from_real(&[-1.0, 0.0, 1.0])).unwrap();
        assert!((r[0] - c(-1.0, 0.0)).norm() < 1e-12);
        assert!((r[1] - c(1.0, 0.0)).norm() < 1e-12);

        let r = poly_roots(&Polynomial::from_real(&[0.0, 2.0])).unwrap();
        assert!(r[0].norm() < 1e-15);

        let r = poly_roots(&Polynomial::from_real(&[-6.0, 11.0, -6.0, 1.0])).unwrap();
        for (got, want) in r.iter().zip([1.0, 2.0, 3.0]) {
            assert!((got - c(want, 0.0)).norm() < 1e-10, "{got} vs {want}");
        }
    }

    #[test]
    fn complex_roots_of_real_polynomial() {
        let r = poly_roots(&Polynomial::from_real(&[1.0, 0.0, 1.0])).unwrap();
        assert!((r[0] - c(0.0, -1.0)).norm() < 1e-12 || (r[0] - c(0.0, 1.0)).norm() < 1e-12);
        assert!((r[0] + r[1]).norm() < 1e-12);
    }

    #[test]
    fn constant_has_no_roots() {
        assert!(poly_roots(&Polynomial::one()).is_err());
    }

    #[test]
    fn synthetic_division() {
        let p = Polynomial::from_real(&[-6.0, 11.0, -6.0, 1.0]);
        let (q, rem) = p.div_linear(c(1.0, 0.0));
        assert!(rem.norm() < 1e-14);
        assert_eq!(q, Polynomial::from_real(&[6.0, -5.0, 1.0]));
        let (_, rem) = p.div_linear(c(4.0, 0.0));
        assert!((rem - p.eval(c(4.0, 0.0))).norm() < 1e-12);
    }

    #[test]
    fn conjugate_quadratic_matches_product() {
        let w = c(0.3, 1.7);
        let q = Polynomial::conjugate_quadratic(w);
        let prod = &Polynomial::linear(w) * &Polynomial::linear(w.conj());
        for k in 0..3 {
            assert!((q.coeff(k) - prod.coeff(k)).norm() < 1e-14);
        }
    }
}
