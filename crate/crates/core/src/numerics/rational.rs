use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::poly::Polynomial;
use crate::error::{Error, Result};

/// Quotient `num / den` of two polynomials, optionally carrying the explicit
/// pole list when the poles are prescribed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RationalFunction {
    pub num: Polynomial,
    pub den: Polynomial,
    pub poles: Option<Vec<Complex64>>,
}

/// Decomposition `f(z) = constant + sum_k residue_k / (z - pole_k)`.
#[derive(Clone, Debug, PartialEq)]
pub struct PartialFractions {
    pub constant: Complex64,
    pub terms: Vec<(Complex64, Complex64)>,
}

impl RationalFunction {
    pub fn new(num: Polynomial, den: Polynomial) -> Result<Self> {
        if den.is_zero() {
            return Err(Error::InvalidData("zero denominator polynomial".into()));
        }
        Ok(Self { num, den, poles: None })
    }

    pub fn polynomial(p: Polynomial) -> Self {
        Self {
            num: p,
            den: Polynomial::one(),
            poles: Some(Vec::new()),
        }
    }

    /// `num / prod_k (z - pole_k)` with the denominator built from the pole list.
    pub fn with_poles(num: Polynomial, poles: Vec<Complex64>) -> Self {
        let den = Polynomial::from_roots(&poles);
        Self {
            num,
            den,
            poles: Some(poles),
        }
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        self.num.eval(z) / self.den.eval(z)
    }

    pub fn mul(&self, other: &Self) -> Self {
        let poles = match (&self.poles, &other.poles) {
            (Some(a), Some(b)) => Some(a.iter().chain(b).copied().collect()),
            _ => None,
        };
        Self {
            num: &self.num * &other.num,
            den: &self.den * &other.den,
            poles,
        }
    }

    /// Poles: the explicit list when present, otherwise the roots of the denominator.
    pub fn pole_set(&self) -> Result<Vec<Complex64>> {
        match &self.poles {
            Some(p) => Ok(p.clone()),
            None if self.den.degree() == Some(0) => Ok(Vec::new()),
            None => self.den.roots(),
        }
    }

    /// Check that `den` equals `scale * prod (z - pole_k)` at the given probe points.
    pub fn verify_poles(&self, probes: &[Complex64], tol: f64) -> bool {
        let Some(poles) = &self.poles else {
            return true;
        };
        let monic = Polynomial::from_roots(poles);
        let scale = self.den.leading() / monic.leading();
        probes.iter().all(|&z| {
            let lhs = self.den.eval(z);
            let rhs = scale * monic.eval(z);
            (lhs - rhs).norm() <= tol * (1.0 + lhs.norm())
        })
    }

    /// Simple-pole partial fraction expansion. Requires `deg num <= deg den` and
    /// pairwise distinct poles.
    pub fn partial_fractions(&self) -> Result<PartialFractions> {
        let poles = self.pole_set()?;
        let dn = self.num.degree();
        let dd = self.den.degree().unwrap_or(0);
        if dn.is_some_and(|d| d > dd) {
            return Err(Error::InvalidData(
                "partial fractions need a rational function without polynomial part".into(),
            ));
        }
        for (i, a) in poles.iter().enumerate() {
            if poles[i + 1..].iter().any(|b| *a == *b) {
                return Err(Error::InvalidData(format!("repeated pole {a}")));
            }
        }
        let lead = self.den.leading();
        let constant = if dn == Some(dd) {
            self.num.leading() / lead
        } else {
            Complex64::new(0.0, 0.0)
        };
        let terms = poles
            .iter()
            .enumerate()
            .map(|(s, &x)| {
                let denom = poles
                    .iter()
                    .enumerate()
                    .filter(|(k, _)| *k != s)
                    .fold(lead, |acc, (_, &y)| acc * (x - y));
                (x, self.num.eval(x) / denom)
            })
            .collect();
        Ok(PartialFractions { constant, terms })
    }
}

impl PartialFractions {
    pub fn eval(&self, z: Complex64) -> Complex64 {
        self.terms
            .iter()
            .fold(self.constant, |acc, &(p, r)| acc + r / (z - p))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn partial_fractions_reproduce_function() {
        let f = RationalFunction::with_poles(
            Polynomial::from_real(&[1.0, -2.0, 3.0]),
            vec![c(0.0, 1.0), c(0.0, -1.0)],
        );
        let pf = f.partial_fractions().unwrap();
        assert!((pf.constant - c(3.0, 0.0)).norm() < 1e-15);
        for z in [c(2.0, 0.5), c(-1.0, 3.0)] {
            assert!((pf.eval(z) - f.eval(z)).norm() < 1e-13);
        }
    }

    #[test]
    fn scaled_denominator_keeps_pole_list() {
        let poles = vec![c(1.0, 1.0), c(2.0, -1.0)];
        let mut f = RationalFunction::with_poles(Polynomial::one(), poles);
        assert!(f.verify_poles(&[c(0.3, 0.1), c(-2.0, 1.0), c(5.0, 5.0)], 1e-12));
        f.den = f.den.scale(c(3.0, 0.0));
        assert!(f.verify_poles(&[c(0.3, 0.1), c(-2.0, 1.0), c(5.0, 5.0)], 1e-12));
        f.den = &f.den + &Polynomial::one();
        assert!(!f.verify_poles(&[c(0.3, 0.1), c(-2.0, 1.0), c(5.0, 5.0)], 1e-12));
    }

    #[test]
    fn zero_denominator_rejected() {
        assert!(RationalFunction::new(Polynomial::one(), Polynomial::zero()).is_err());
    }
}
