//! Finite sections of the tridiagonal pencil `J1 - l J2` attached to a Schur chain.
//!
//! `J1` is Hermitian with diagonal `a1_j`, subdiagonal `z_j b_j` and superdiagonal
//! `conj(z_j) b_j`; `J2` is real symmetric with diagonal `a2_j` and off-diagonals `b_j`.
//! The m-function `<(J1 - l J2)^{-1} e_0, e_0>` of the section `[0, n]` is the convergent `R_n`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::numerics::dense::{hermitian_eigen, DenseMatrix};
use crate::numerics::TridiagonalMatrix;
use crate::recurrence::eval_convergent;
use crate::schur::{SchurChain, SchurStep};

/// Tolerance of the `a2 = 1 + b^2` check in [`j2_factorize`].
pub const CONNECTION_TOL: f64 = 1e-9;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

fn re(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

#[derive(Clone, Debug, PartialEq)]
pub struct PencilSection {
    pub lo: usize,
    pub hi: usize,
    pub j1: TridiagonalMatrix,
    pub j2: TridiagonalMatrix,
    /// `b_hi` (zero when record `hi` terminates the chain); not part of the matrices.
    pub b_last: f64,
}

/// Section `[lo, hi]` built from coefficient records `lo..=hi`.
pub fn build_section(chain: &SchurChain, lo: usize, hi: usize) -> Result<PencilSection> {
    if lo > hi {
        return Err(Error::Shape(format!("empty section [{lo}, {hi}]")));
    }
    if chain.len() <= hi {
        return Err(Error::ChainTooShort {
            needed: hi + 1,
            available: chain.len(),
        });
    }
    let rec: Vec<SchurStep> = chain.records().skip(lo).take(hi - lo + 1).copied().collect();
    let off = &rec[..rec.len() - 1];
    Ok(PencilSection {
        lo,
        hi,
        j1: TridiagonalMatrix::new(
            rec.iter().map(|s| re(s.a1)).collect(),
            off.iter().map(|s| s.z * s.b).collect(),
            off.iter().map(|s| s.z.conj() * s.b).collect(),
        )?,
        j2: TridiagonalMatrix::new(
            rec.iter().map(|s| re(s.a2)).collect(),
            off.iter().map(|s| re(s.b)).collect(),
            off.iter().map(|s| re(s.b)).collect(),
        )?,
        b_last: rec[rec.len() - 1].b,
    })
}

/// Flat record of a section for serialization.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SectionRecord {
    pub lo: usize,
    pub hi: usize,
    pub diag1: Vec<f64>,
    pub off1_sub: Vec<Complex64>,
    pub off1_sup: Vec<Complex64>,
    pub diag2: Vec<f64>,
    pub off2: Vec<f64>,
}

impl PencilSection {
    pub fn size(&self) -> usize {
        self.j1.size()
    }

    pub fn record(&self) -> SectionRecord {
        SectionRecord {
            lo: self.lo,
            hi: self.hi,
            diag1: self.j1.diag.iter().map(|c| c.re).collect(),
            off1_sub: self.j1.sub.clone(),
            off1_sup: self.j1.sup.clone(),
            diag2: self.j2.diag.iter().map(|c| c.re).collect(),
            off2: self.j2.sub.iter().map(|c| c.re).collect(),
        }
    }

    /// `<(J1 - l J2)^{-1} e_0, e_0>` with `e_0` the first vector of the section.
    pub fn m_function(&self, lambda: Complex64) -> Result<Complex64> {
        let a = self.j1.pencil(&self.j2, lambda)?;
        let mut e0 = vec![ZERO; self.size()];
        e0[0] = ONE;
        Ok(a.solve(&e0)?[0])
    }

    /// `<J2^{-1} e_0, e_0>`.
    pub fn j2_inverse_corner(&self) -> Result<f64> {
        let mut e0 = vec![ZERO; self.size()];
        e0[0] = ONE;
        Ok(self.j2.solve(&e0)?[0].re)
    }
}

pub fn m_function(section: &PencilSection, lambda: Complex64) -> Result<Complex64> {
    section.m_function(lambda)
}

/// Worst-case residual of an identity over a grid.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GridReport {
    /// Largest `|lhs - rhs| / (1 + |rhs|)`.
    pub max_residual: f64,
    pub worst_point: Option<Complex64>,
    pub points: usize,
}

impl GridReport {
    fn new() -> Self {
        Self {
            max_residual: 0.0,
            worst_point: None,
            points: 0,
        }
    }

    fn push(&mut self, lambda: Complex64, lhs: Complex64, rhs: Complex64) {
        let r = (lhs - rhs).norm() / (1.0 + rhs.norm());
        self.points += 1;
        if r > self.max_residual || self.worst_point.is_none() {
            self.max_residual = self.max_residual.max(r);
            self.worst_point = Some(lambda);
        }
    }

    pub fn passes(&self, tol: f64) -> bool {
        self.max_residual <= tol
    }
}

/// `m_[0,n](l)` against `R_n(l) = Q_{n+1}(l)/P_{n+1}(l)` over `grid`.
pub fn check_mfunction_identity(chain: &SchurChain, n: usize, grid: &[Complex64]) -> Result<GridReport> {
    check_mfunction_identity_with(chain, chain, n, grid)
}

/// As [`check_mfunction_identity`], with the pencil built from `pencil_chain` and the
/// convergent from `poly_chain`. Used for fault injection.
pub fn check_mfunction_identity_with(
    pencil_chain: &SchurChain,
    poly_chain: &SchurChain,
    n: usize,
    grid: &[Complex64],
) -> Result<GridReport> {
    let section = build_section(pencil_chain, 0, n)?;
    let mut rep = GridReport::new();
    for &l in grid {
        rep.push(l, section.m_function(l)?, eval_convergent(poly_chain, n, l)?);
    }
    Ok(rep)
}

/// `m_[j,n] = -1 / (a2_j l - a1_j + b_j^2 (l - z_j)(l - conj z_j) m_[j+1,n])` over `grid`.
pub fn riccati_check(chain: &SchurChain, j: usize, n: usize, grid: &[Complex64]) -> Result<GridReport> {
    if j >= n {
        return Err(Error::Shape(format!("Riccati window needs j < n, got j={j}, n={n}")));
    }
    let outer = build_section(chain, j, n)?;
    let inner = build_section(chain, j + 1, n)?;
    let s = chain.record(j).expect("section built");
    let mut rep = GridReport::new();
    for &l in grid {
        let rhs = -1.0 / (s.linear(l) + s.quadratic(l) * inner.m_function(l)?);
        rep.push(l, outer.m_function(l)?, rhs);
    }
    Ok(rep)
}

/// Sorted eigenvalues of the symmetric-definite pencil `(J1, J2)`, by Cholesky reduction
/// `J2 = L L^H` and a Hermitian eigensolve of `L^{-1} J1 L^{-H}`.
pub fn gevp_spectrum(section: &PencilSection) -> Result<Vec<f64>> {
    // J2 is real; a real factorization fails on indefinite input
    let chol = section
        .j2
        .to_dense()
        .map(|c| c.re)
        .cholesky()
        .ok_or(Error::NotPositiveDefinite)?;
    let l: DenseMatrix = chol.l().map(re);
    let n = section.size();
    // X = L^{-1} J1, then C = X L^{-H} = (L^{-1} X^H)^H
    let x = l
        .solve_lower_triangular(&section.j1.to_dense())
        .ok_or(Error::NotPositiveDefinite)?;
    let c = l
        .solve_lower_triangular(&x.adjoint())
        .ok_or(Error::NotPositiveDefinite)?
        .adjoint();
    let c = DMatrix::from_fn(n, n, |i, j| (c[(i, j)] + c[(j, i)].conj()) * 0.5);
    Ok(hermitian_eigen(&c)?.0)
}

/// Bidiagonal factors of `J2` and the finite-section truncation effect.
#[derive(Clone, Debug, PartialEq)]
pub struct J2Factorization {
    /// Unit upper bidiagonal with superdiagonal `b_j`.
    pub upper: DMatrix<f64>,
    /// Unit lower bidiagonal with subdiagonal `b_j`.
    pub lower: DMatrix<f64>,
    /// `J2[hi,hi] - (U L)[hi,hi] = b_hi^2`.
    pub last_diagonal_discrepancy: f64,
    /// Largest `|J2 - U L|` away from the last diagonal entry.
    pub max_other_error: f64,
}

/// `J2 = U L` with unit bidiagonal factors carrying `b_j`.
pub fn j2_factorize(section: &PencilSection) -> Result<J2Factorization> {
    let n = section.size();
    let b: Vec<f64> = section.j2.sub.iter().map(|c| c.re).collect();
    for j in 0..n {
        let bj = if j + 1 < n { b[j] } else { section.b_last };
        let a2 = section.j2.diag[j].re;
        if (a2 - 1.0 - bj * bj).abs() > CONNECTION_TOL * a2.abs().max(1.0) {
            return Err(Error::InvariantViolated(format!(
                "diag(J2)[{j}] = {a2} but 1 + b^2 = {}",
                1.0 + bj * bj
            )));
        }
    }
    let upper = DMatrix::from_fn(n, n, |i, j| match j.checked_sub(i) {
        Some(0) => 1.0,
        Some(1) => b[i],
        _ => 0.0,
    });
    let lower = upper.transpose();
    let prod = &upper * &lower;
    let j2 = section.j2.to_dense().map(|c| c.re);
    let mut max_other_error: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i + 1 == n && j + 1 == n {
                continue;
            }
            max_other_error = max_other_error.max((j2[(i, j)] - prod[(i, j)]).abs());
        }
    }
    Ok(J2Factorization {
        last_diagonal_discrepancy: j2[(n - 1, n - 1)] - prod[(n - 1, n - 1)],
        upper,
        lower,
        max_other_error,
    })
}

/// Relative gap between `<J2 x, x>` and
/// `|x_0|^2 + sum_{j<hi} |b_j x_j + x_{j+1}|^2 + |b_hi x_hi|^2`.
pub fn sum_of_squares_residual(section: &PencilSection, x: &[Complex64]) -> Result<f64> {
    let n = section.size();
    if x.len() != n {
        return Err(Error::Shape(format!("vector of length {} for section of size {n}", x.len())));
    }
    let jx = section.j2.mul_vec(x);
    let form: f64 = jx.iter().zip(x).map(|(a, b)| (a * b.conj()).re).sum();
    let b: Vec<f64> = section.j2.sub.iter().map(|c| c.re).collect();
    let mut sos = x[0].norm_sqr();
    for j in 0..n - 1 {
        sos += (b[j] * x[j] + x[j + 1]).norm_sqr();
    }
    sos += (section.b_last * x[n - 1]).norm_sqr();
    Ok((form - sos).abs() / sos.max(f64::MIN_POSITIVE))
}

/// The two a-priori bounds of the convergence argument.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ResolventReport {
    /// `<J2^{-1} e_0, e_0>` for the section `[0, n]`; bounded by 1.
    pub j2_inverse_corner: f64,
    /// Largest `|R_n(l)| dist(l, [alpha, beta])` over the grid; bounded by 1.
    pub max_scaled_convergent: f64,
}

impl ResolventReport {
    pub fn passes(&self, slack: f64) -> bool {
        self.j2_inverse_corner <= 1.0 + slack && self.max_scaled_convergent <= 1.0 + slack
    }
}

pub fn resolvent_bound_check(chain: &SchurChain, n: usize, grid: &[Complex64]) -> Result<ResolventReport> {
    let section = build_section(chain, 0, n)?;
    let interval = chain.interval();
    let mut worst: f64 = 0.0;
    for &l in grid {
        let d = interval.dist(l);
        if d == 0.0 {
            return Err(Error::PointOnSupport(l));
        }
        worst = worst.max(eval_convergent(chain, n, l)?.norm() * d);
    }
    Ok(ResolventReport {
        j2_inverse_corner: section.j2_inverse_corner()?,
        max_scaled_convergent: worst,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::{Interval, Measure, NodeSequence};
    use crate::numerics::c64;
    use crate::recurrence::{build_polys, check_zeros};
    use crate::schur::run_chain;

    fn two_point_chain() -> SchurChain {
        let m = Measure::discrete(Interval::new(-1.0, 1.0).unwrap(), vec![-1.0, 1.0], vec![0.5, 0.5]).unwrap();
        run_chain(&m, &NodeSequence::vertical(1.0, 1.0, 0.0, 4, 0.5).unwrap(), 4).unwrap()
    }

    fn cheb_chain(n: usize) -> SchurChain {
        let nodes = NodeSequence::arc(0.0, 1.5, n, 0.2).unwrap();
        run_chain(&Measure::chebyshev(), &nodes, n).unwrap()
    }

    fn grid() -> Vec<Complex64> {
        (0..12)
            .map(|k| {
                let th = 0.3 + 0.5 * k as f64;
                c64(1.7 * th.cos(), 1.7 * th.sin())
            })
            .collect()
    }

    fn close(a: Complex64, b: Complex64, tol: f64) -> bool {
        (a - b).norm() <= tol
    }

    #[test]
    fn two_point_sections() {
        let chain = two_point_chain();
        let s0 = build_section(&chain, 0, 0).unwrap();
        assert!(close(s0.j1.diag[0], ZERO, 1e-14) && close(s0.j2.diag[0], re(2.0), 1e-14));
        let s = build_section(&chain, 0, 1).unwrap();
        assert!(close(s.j1.sup[0], c64(0.0, -1.0), 1e-14));
        assert!(close(s.j1.sub[0], c64(0.0, 1.0), 1e-14));
        assert_eq!(s.j1.sub[0].conj(), s.j1.sup[0]);
        let j2 = s.j2.to_dense().map(|c| c.re);
        let want = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 1.0]);
        assert!((j2 - want).abs().max() < 1e-13);
        assert!(matches!(build_section(&chain, 0, 2), Err(Error::ChainTooShort { .. })));
    }

    #[test]
    fn two_point_m_functions() {
        let chain = two_point_chain();
        let s0 = build_section(&chain, 0, 0).unwrap();
        let l = c64(0.3, 0.8);
        assert!(close(s0.m_function(l).unwrap(), -1.0 / (2.0 * l), 1e-14));
        let s = build_section(&chain, 0, 1).unwrap();
        assert!(close(s.m_function(c64(0.0, 1.0)).unwrap(), c64(0.0, 0.5), 1e-13));
        assert!(close(s.m_function(c64(0.0, 2.0)).unwrap(), c64(0.0, 0.4), 1e-13));
        assert!(close(s.m_function(l.conj()).unwrap(), s.m_function(l).unwrap().conj(), 1e-14));
        assert!(check_mfunction_identity(&chain, 1, &[c64(0.0, 2.0)]).unwrap().max_residual < 1e-12);
        assert!(matches!(s.m_function(c64(1.0, 0.0)), Err(Error::SingularMatrix { .. })));
    }

    #[test]
    fn mfunction_identity_on_chebyshev() {
        let chain = cheb_chain(12);
        for n in [0, 4, 11] {
            let rep = check_mfunction_identity(&chain, n, &grid()).unwrap();
            assert!(rep.passes(1e-9), "n={n}: {rep:?}");
            assert_eq!(rep.points, 12);
        }
        let s = build_section(&chain, 0, 11).unwrap();
        for l in grid().into_iter().filter(|l| l.im > 0.0) {
            assert!(s.m_function(l).unwrap().im > 0.0);
        }
    }

    #[test]
    fn tampered_pencil_breaks_identity() {
        let chain = cheb_chain(8);
        let bad = chain.perturbed(3, crate::schur::StepField::A1, 1e-3).unwrap();
        let rep = check_mfunction_identity_with(&bad, &chain, 7, &grid()).unwrap();
        assert!(!rep.passes(1e-9));
    }

    #[test]
    fn riccati_windows() {
        let chain = two_point_chain();
        assert!(riccati_check(&chain, 0, 1, &grid()).unwrap().passes(1e-12));
        let chain = cheb_chain(12);
        for j in [0, 5, 10] {
            assert!(riccati_check(&chain, j, 11, &grid()).unwrap().passes(1e-9), "j={j}");
        }
        // innermost window is scalar
        let s = build_section(&chain, 11, 11).unwrap();
        let r = chain.record(11).unwrap();
        let l = c64(0.4, 0.9);
        assert!(close(s.m_function(l).unwrap(), 1.0 / (r.a1 - l * r.a2), 1e-14));
        assert!(riccati_check(&chain, 3, 3, &grid()).is_err());
    }

    #[test]
    fn spectra() {
        let chain = two_point_chain();
        let ev = gevp_spectrum(&build_section(&chain, 0, 1).unwrap()).unwrap();
        assert!((ev[0] + 1.0).abs() < 1e-12 && (ev[1] - 1.0).abs() < 1e-12);
        let ev = gevp_spectrum(&build_section(&chain, 0, 0).unwrap()).unwrap();
        assert!(ev[0].abs() < 1e-14);

        let chain = cheb_chain(12);
        for n in [3, 8, 11] {
            let ev = gevp_spectrum(&build_section(&chain, 0, n).unwrap()).unwrap();
            let zeros = check_zeros(&build_polys(&chain, n).unwrap(), chain.interval()).unwrap();
            assert_eq!(ev.len(), n + 1);
            for (a, b) in ev.iter().zip(&zeros.p_zeros) {
                assert!((a - b).abs() < 1e-7, "n={n}: {a} vs {b}");
            }
            assert!(ev.iter().all(|x| (-1.0 - 1e-10..=1.0 + 1e-10).contains(x)));
        }
    }

    #[test]
    fn indefinite_j2_rejected() {
        let mut s = build_section(&two_point_chain(), 0, 1).unwrap();
        s.j2.diag[1] = re(-1.0);
        assert_eq!(gevp_spectrum(&s), Err(Error::NotPositiveDefinite));
    }

    #[test]
    fn factorization() {
        let s = build_section(&two_point_chain(), 0, 1).unwrap();
        let f = j2_factorize(&s).unwrap();
        let u = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0]);
        assert!((&f.upper - &u).abs().max() < 1e-13);
        assert!((&f.lower - u.transpose()).abs().max() < 1e-13);
        assert!(f.last_diagonal_discrepancy.abs() < 1e-13);

        let chain = cheb_chain(6);
        let s0 = build_section(&chain, 0, 0).unwrap();
        let f = j2_factorize(&s0).unwrap();
        let b0 = chain.steps()[0].b;
        assert!((f.last_diagonal_discrepancy - b0 * b0).abs() < 1e-12);

        let s = build_section(&chain, 0, 5).unwrap();
        let f = j2_factorize(&s).unwrap();
        assert!(f.max_other_error < 1e-12);
        let x: Vec<Complex64> = (0..6).map(|k| c64((k as f64).sin(), (k as f64 * 0.7).cos())).collect();
        assert!(sum_of_squares_residual(&s, &x).unwrap() < 1e-13);

        let mut bad = s.clone();
        bad.j2.diag[2] += 0.1;
        assert!(matches!(j2_factorize(&bad), Err(Error::InvariantViolated(_))));
    }

    #[test]
    fn resolvent_bounds() {
        let chain = two_point_chain();
        let rep = resolvent_bound_check(&chain, 1, &[c64(0.0, 2.0)]).unwrap();
        assert!((rep.j2_inverse_corner - 1.0).abs() < 1e-12);
        let rep = resolvent_bound_check(&chain, 0, &[c64(0.0, 2.0)]).unwrap();
        assert!((rep.max_scaled_convergent - 0.5).abs() < 1e-14);
        assert!((rep.j2_inverse_corner - 0.5).abs() < 1e-14);

        let chain = cheb_chain(12);
        for n in 0..12 {
            let rep = resolvent_bound_check(&chain, n, &grid()).unwrap();
            assert!(rep.passes(1e-10), "n={n}: {rep:?}");
            let lead = build_polys(&chain, n).unwrap().lead_ratio();
            assert!((lead + rep.j2_inverse_corner).abs() < 1e-10);
        }
    }
}
