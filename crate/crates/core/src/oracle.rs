//! Independent multipoint Padé solver used as ground truth for the chain, and
//! divided-difference realizations of the interpolation orthogonality relations.
//!
//! The main solver finds real polynomials `Q` (degree `<= n`) and `P` (degree `<= n + 1`)
//! with `Q(z_k) = phi(z_k) P(z_k)` for `k = 0..=n`. Real coefficients make the
//! conditions at `conj z_k` automatic, and `deg Q < deg P` gives the zero at infinity.
//! The `2n + 2` real equations in `2n + 3` unknowns are solved as a homogeneous
//! system: the null vector is read off an SVD, and a second small singular value
//! means the data are degenerate.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::biorth::Functional;
use crate::error::{Error, Result};
use crate::measure::{divided_difference_with_scale, Measure, NodeSequence};
use crate::numerics::{Polynomial, RationalFunction};
use crate::recurrence::eval_convergent;
use crate::schur::SchurChain;

/// Second-smallest singular value, relative to the largest, below which the null space is not one-dimensional.
pub const RANK_GAP: f64 = 1e-10;
/// Allowed interpolation residual, relative to `(1 + |phi(z_k)|) |P(z_k)|`.
pub const RESIDUAL_TOL: f64 = 1e-9;
/// Distance at which a zero of `Q` and a zero of `P` count as common.
pub const COMMON_ROOT_TOL: f64 = 1e-8;

const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Data of the `[n / n+1]` multipoint Padé problem at `infinity, z_0, conj z_0, .., z_n, conj z_n`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InterpolationProblem {
    pub nodes: Vec<Complex64>,
    pub values: Vec<Complex64>,
    pub num_degree: usize,
    pub den_degree: usize,
    /// Total mass, the coefficient of `-1/l` in `phi` at infinity.
    pub mass: f64,
}

impl InterpolationProblem {
    pub fn new(nodes: Vec<Complex64>, values: Vec<Complex64>, mass: f64) -> Result<Self> {
        if nodes.is_empty() || nodes.len() != values.len() {
            return Err(Error::Shape(format!("{} nodes, {} values", nodes.len(), values.len())));
        }
        for (i, z) in nodes.iter().enumerate() {
            if nodes[i + 1..].contains(z) || nodes[i + 1..].contains(&z.conj()) {
                return Err(Error::DuplicatePoints);
            }
            if z.im == 0.0 {
                return Err(Error::InvalidNodes(format!("node {z} is real")));
            }
        }
        let n = nodes.len() - 1;
        Ok(Self {
            nodes,
            values,
            num_degree: n,
            den_degree: n + 1,
            mass,
        })
    }

    /// Problem for `R_n` of the Markov function of `m` at the first `n + 1` nodes.
    pub fn from_measure(m: &Measure, nodes: &NodeSequence, n: usize) -> Result<Self> {
        let pts = nodes
            .as_slice()
            .get(..=n)
            .ok_or_else(|| Error::InvalidNodes(format!("{} nodes needed, {} available", n + 1, nodes.len())))?
            .to_vec();
        let values = pts.iter().map(|&z| m.eval_markov(z)).collect::<Result<_>>()?;
        Self::new(pts, values, m.mass())
    }
}

/// Oracle output: the reduced interpolant with its diagnostics.
#[derive(Clone, Debug)]
pub struct OracleSolution {
    pub rational: RationalFunction,
    /// Smallest nonzero singular value over the largest.
    pub rank_gap: f64,
    /// Largest relative interpolation residual at the nodes.
    pub max_residual: f64,
}

impl OracleSolution {
    pub fn eval(&self, lambda: Complex64) -> Complex64 {
        self.rational.eval(lambda)
    }

    pub fn numerator(&self) -> &Polynomial {
        &self.rational.num
    }

    pub fn denominator(&self) -> &Polynomial {
        &self.rational.den
    }
}

/// Singular values ascending with the right singular vectors as columns.
fn svd_ascending(a: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let svd = a.svd(false, true);
    let vt = svd.v_t.expect("right singular vectors requested");
    let mut idx: Vec<usize> = (0..svd.singular_values.len()).collect();
    idx.sort_by(|&i, &j| svd.singular_values[i].total_cmp(&svd.singular_values[j]));
    let sv = idx.iter().map(|&i| svd.singular_values[i]).collect();
    let v = DMatrix::from_fn(vt.ncols(), idx.len(), |r, c| vt[(idx[c], r)]);
    (sv, v)
}

/// Polynomial basis orthonormal on a point set closed under conjugation (Arnoldi
/// applied to the diagonal matrix of the points). The basis polynomials have real
/// coefficients.
struct ArnoldiBasis {
    /// `values[j][k]` is the `j`-th basis polynomial at point `k`.
    values: Vec<Vec<Complex64>>,
    /// Monomial coefficients of each basis polynomial.
    polys: Vec<Polynomial>,
}

impl ArnoldiBasis {
    fn new(points: &[Complex64], degree: usize) -> Result<Self> {
        let m = points.len();
        let q0 = vec![Complex64::new(1.0 / (m as f64).sqrt(), 0.0); m];
        let mut values = vec![q0];
        let mut polys = vec![Polynomial::from_real(&[1.0 / (m as f64).sqrt()])];
        for j in 0..degree {
            let mut v: Vec<Complex64> = points.iter().zip(&values[j]).map(|(x, q)| x * q).collect();
            let mut poly = polys[j].mul_linear(Complex64::new(0.0, 0.0));
            // Two passes of Gram-Schmidt keep the basis orthonormal to working precision.
            for _ in 0..2 {
                for i in 0..=j {
                    let h: Complex64 = values[i].iter().zip(&v).map(|(a, b)| a.conj() * b).sum();
                    let h = Complex64::new(h.re, 0.0);
                    v.iter_mut().zip(&values[i]).for_each(|(x, q)| *x -= h * q);
                    poly = &poly - &polys[i].scale(h);
                }
            }
            let norm = v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
            if norm == 0.0 {
                return Err(Error::RankDeficient { gap: 0.0, next: 0.0 });
            }
            let inv = Complex64::new(1.0 / norm, 0.0);
            values.push(v.into_iter().map(|c| c * inv).collect());
            polys.push(poly.scale(inv).into_real(f64::INFINITY)?);
        }
        Ok(Self { values, polys })
    }
}

pub fn newton_pade_solve(prob: &InterpolationProblem) -> Result<OracleSolution> {
    let n = prob.num_degree;
    let nq = n + 1;
    let np = prob.den_degree + 1;
    let cols = nq + np;
    let basis = ArnoldiBasis::new(&conjugate_pair_order(&prob.nodes), prob.den_degree)?;
    let mut a = DMatrix::<f64>::zeros(cols, cols);
    for (k, &f) in prob.values.iter().enumerate() {
        // Point 2k of the conjugate-pair ordering is z_k itself.
        let mut row = vec![Complex64::new(0.0, 0.0); cols];
        for j in 0..np {
            let b = basis.values[j][2 * k];
            if j < nq {
                row[j] = b;
            }
            row[nq + j] = -f * b;
        }
        let norm = row.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        for (j, c) in row.iter().enumerate() {
            a[(2 * k, j)] = c.re / norm;
            a[(2 * k + 1, j)] = c.im / norm;
        }
    }
    let (sv, v) = svd_ascending(a);
    let top = sv[cols - 1];
    let gap = sv[1] / top;
    if gap <= RANK_GAP {
        return Err(Error::RankDeficient {
            gap,
            next: sv.get(2).map_or(f64::NAN, |s| s / top),
        });
    }
    let x = v.column(0);
    let combine = |offset: usize, count: usize| {
        (0..count).fold(Polynomial::zero(), |acc, j| {
            &acc + &basis.polys[j].scale(Complex64::new(x[offset + j], 0.0))
        })
    };
    let q = combine(0, nq);
    let p = combine(nq, np);
    let xmax = (0..np).map(|j| x[nq + j].abs()).fold(0.0, f64::max);
    if x[nq + np - 1].abs() <= 1e-10 * xmax {
        return Err(Error::NormalCaseViolation(format!(
            "denominator degree drops below {}",
            prob.den_degree
        )));
    }
    let lead = p.coeff(prob.den_degree);
    let qp = q.scale(ONE / lead).into_real(f64::INFINITY)?;
    let pp = p.scale(ONE / lead).into_real(f64::INFINITY)?;

    let mut max_residual: f64 = 0.0;
    for (&z, &f) in prob.nodes.iter().zip(&prob.values) {
        let pz = pp.eval(z);
        let res = (qp.eval(z) - f * pz).norm() / ((1.0 + f.norm()) * pz.norm()).max(f64::MIN_POSITIVE);
        max_residual = max_residual.max(res);
    }
    if max_residual > RESIDUAL_TOL {
        return Err(Error::InvariantViolated(format!(
            "interpolation residual {max_residual:e} at the nodes"
        )));
    }
    if !qp.is_zero() && qp.degree() > Some(0) {
        let rq = qp.roots()?;
        let rp = pp.roots()?;
        for x in &rq {
            if let Some(y) = rp.iter().find(|y| (*x - **y).norm() <= COMMON_ROOT_TOL * (1.0 + x.norm())) {
                return Err(Error::NormalCaseViolation(format!("common zero {x} ~ {y}")));
            }
        }
    }
    Ok(OracleSolution {
        rational: RationalFunction::new(qp, pp)?,
        rank_gap: gap,
        max_residual,
    })
}

/// Oracle against chain comparison on a probe grid.
#[derive(Clone, Debug, Serialize)]
pub struct CrossValidation {
    pub n: usize,
    /// `(lambda, chain R_n, oracle, |difference|)`.
    pub rows: Vec<(Complex64, Complex64, Complex64, f64)>,
    pub max_diff: f64,
}

pub fn cross_validate(chain: &SchurChain, n: usize, grid: &[Complex64]) -> Result<CrossValidation> {
    let prob = InterpolationProblem::from_measure(chain.measure(), chain.nodes(), n)?;
    let sol = newton_pade_solve(&prob)?;
    let mut rows = Vec::with_capacity(grid.len());
    let mut max_diff: f64 = 0.0;
    for &l in grid {
        let r = eval_convergent(chain, n, l)?;
        let o = sol.eval(l);
        let d = (r - o).norm();
        max_diff = max_diff.max(d);
        rows.push((l, r, o, d));
    }
    Ok(CrossValidation { n, rows, max_diff })
}

/// Whether the interpolants of orders `n` and `n + 1` differ at the probe.
pub fn normal_case_spot_check(m: &Measure, nodes: &NodeSequence, n: usize, probe: Complex64) -> Result<bool> {
    let a = newton_pade_solve(&InterpolationProblem::from_measure(m, nodes, n)?)?;
    let b = newton_pade_solve(&InterpolationProblem::from_measure(m, nodes, n + 1)?)?;
    let (x, y) = (a.eval(probe), b.eval(probe));
    Ok((x - y).norm() > 1e-12 * (1.0 + x.norm()))
}

/// Interpolation points in the order `z_0, conj z_0, z_1, conj z_1, ..`.
pub fn conjugate_pair_order(nodes: &[Complex64]) -> Vec<Complex64> {
    nodes.iter().flat_map(|&z| [z, z.conj()]).collect()
}

/// Markov function samples at the given points.
pub fn sample_markov(m: &Measure, points: &[Complex64]) -> Result<Vec<Complex64>> {
    points.iter().map(|&z| m.eval_markov(z)).collect()
}

/// Residuals of `[x_0 .. x_{2n-1}] { z^j F(z) P(z) } = 0`.
#[derive(Clone, Debug, Serialize)]
pub struct OrtPiReport {
    /// Relative residuals for `j = 0..n`.
    pub residuals: Vec<f64>,
    /// The `j = n` value, which is not expected to vanish.
    pub at_n: f64,
}

impl OrtPiReport {
    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().copied().fold(0.0, f64::max)
    }
}

/// `points` are the `2n` interpolation points, `values` the samples of `F` there.
pub fn check_ort_pi(p: &Polynomial, points: &[Complex64], values: &[Complex64]) -> Result<OrtPiReport> {
    if points.len() % 2 != 0 || points.len() != values.len() {
        return Err(Error::Shape(format!("{} points, {} values", points.len(), values.len())));
    }
    let n = points.len() / 2;
    let rel = |j: usize| -> Result<f64> {
        let f: Vec<Complex64> = points
            .iter()
            .zip(values)
            .map(|(&x, &v)| x.powi(j as i32) * v * p.eval(x))
            .collect();
        let (dd, scale) = divided_difference_with_scale(points, &f)?;
        Ok(dd.norm() / scale.max(f64::MIN_POSITIVE))
    };
    Ok(OrtPiReport {
        residuals: (0..n).map(rel).collect::<Result<_>>()?,
        at_n: rel(n)?,
    })
}

/// `sigma{f} = L c + sum_k res_k F(x_k)` for `f = c + sum_k res_k / (z - x_k)`:
/// the linear functional determined by `F` at the points and the constant `L`.
/// For a Markov function with `L` the mass it coincides with integration.
pub struct DividedDifferenceFunctional {
    points: Vec<Complex64>,
    values: Vec<Complex64>,
    constant: Complex64,
}

impl DividedDifferenceFunctional {
    pub fn new(points: Vec<Complex64>, values: Vec<Complex64>, constant: Complex64) -> Result<Self> {
        if points.len() != values.len() {
            return Err(Error::Shape(format!("{} points, {} values", points.len(), values.len())));
        }
        Ok(Self {
            points,
            values,
            constant,
        })
    }

    /// Samples of the Markov function of `m` at `points`, with the mass as constant.
    pub fn from_measure(m: &Measure, points: Vec<Complex64>) -> Result<Self> {
        let values = sample_markov(m, &points)?;
        Self::new(points, values, Complex64::new(m.mass(), 0.0))
    }

    fn value_at(&self, pole: Complex64) -> Result<Complex64> {
        self.points
            .iter()
            .position(|&x| (x - pole).norm() <= 1e-12 * (1.0 + x.norm()))
            .map(|i| self.values[i])
            .ok_or_else(|| Error::InvalidData(format!("no sample at pole {pole}")))
    }
}

impl Functional for DividedDifferenceFunctional {
    fn apply(&self, f: &RationalFunction) -> Result<Complex64> {
        let pf = f.partial_fractions()?;
        let mut total = pf.constant * self.constant;
        for (pole, res) in pf.terms {
            total += res * self.value_at(pole)?;
        }
        Ok(total)
    }
}

/// Monic denominator `P_n` of the `[n-1 / n]` interpolant of `F` at `2n` points
/// (complex coefficients, no symmetry assumed).
pub fn diagonal_denominator(points: &[Complex64], values: &[Complex64], n: usize) -> Result<Polynomial> {
    if points.len() != 2 * n || values.len() != 2 * n {
        return Err(Error::Shape(format!("diagonal [{}/{n}] problem needs {} points", n.saturating_sub(1), 2 * n)));
    }
    if n == 0 {
        return Ok(Polynomial::one());
    }
    let scale = points.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let cols = 2 * n + 1;
    let mut a = DMatrix::<Complex64>::zeros(cols, cols);
    for (k, (&z, &f)) in points.iter().zip(values).enumerate() {
        let zh = z / scale;
        let mut pw = ONE;
        for j in 0..=n {
            if j < n {
                a[(k, j)] = -pw;
            }
            a[(k, n + j)] = f * pw;
            pw *= zh;
        }
        let norm = a.row(k).iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        a.row_mut(k).iter_mut().for_each(|c| *c /= norm);
    }
    let svd = a.svd(false, true);
    let vt = svd.v_t.expect("right singular vectors requested");
    let mut idx: Vec<usize> = (0..cols).collect();
    idx.sort_by(|&i, &j| svd.singular_values[i].total_cmp(&svd.singular_values[j]));
    let top = svd.singular_values[idx[cols - 1]];
    let gap = svd.singular_values[idx[1]] / top;
    if gap <= RANK_GAP {
        return Err(Error::RankDeficient {
            gap,
            next: svd.singular_values[idx[2.min(cols - 1)]] / top,
        });
    }
    let x: Vec<Complex64> = vt.row(idx[0]).iter().map(|c| c.conj()).collect();
    let p: Vec<Complex64> = (0..=n).map(|j| x[n + j] * scale.powi(-(j as i32))).collect();
    let lead = p[n];
    if lead.norm() * scale.powi(n as i32) <= 1e-10 * x[n..].iter().map(|c| c.norm()).fold(0.0, f64::max) {
        return Err(Error::NormalCaseViolation(format!("denominator degree drops below {n}")));
    }
    Ok(Polynomial::new(p.into_iter().map(|c| c / lead).collect()))
}

/// `U_n = P_n / prod_k (z - x_{2k-1})` from the points `x_0..x_{2n-1}` and
/// `V_n = P~_n / prod_k (z - x_{2k})` from the modified set `x_0..x_{2n-2}, x_{2n}`.
pub fn pi_biorthogonal_pair(
    points: &[Complex64],
    values: &[Complex64],
    n: usize,
) -> Result<(RationalFunction, RationalFunction)> {
    if points.len() < 2 * n + 1 || values.len() != points.len() {
        return Err(Error::Shape(format!("biorthogonal pair {n} needs {} points", 2 * n + 1)));
    }
    if n == 0 {
        let one = RationalFunction::polynomial(Polynomial::one());
        return Ok((one.clone(), one));
    }
    let p = diagonal_denominator(&points[..2 * n], &values[..2 * n], n)?;
    let mut mp: Vec<Complex64> = points[..2 * n - 1].to_vec();
    mp.push(points[2 * n]);
    let mut mv: Vec<Complex64> = values[..2 * n - 1].to_vec();
    mv.push(values[2 * n]);
    let pt = diagonal_denominator(&mp, &mv, n)?;
    let odd = (1..=n).map(|k| points[2 * k - 1]).collect();
    let even = (1..=n).map(|k| points[2 * k]).collect();
    Ok((RationalFunction::with_poles(p, odd), RationalFunction::with_poles(pt, even)))
}

/// `G_{nm} = sigma{U_n V_m / (z - x_0)}` for the interpolation pairs, `n, m <= n_max`.
#[derive(Clone, Debug, Serialize)]
pub struct BiortPiReport {
    pub gram: Vec<Vec<Complex64>>,
    pub max_offdiag: f64,
    pub max_diag: f64,
}

impl BiortPiReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.max_offdiag <= tol * self.max_diag
    }
}

pub fn check_biort_pi(points: &[Complex64], values: &[Complex64], n_max: usize) -> Result<BiortPiReport> {
    let sigma = DividedDifferenceFunctional::new(points.to_vec(), values.to_vec(), Complex64::new(0.0, 0.0))?;
    let pairs = (0..=n_max)
        .map(|n| pi_biorthogonal_pair(points, values, n))
        .collect::<Result<Vec<_>>>()?;
    let x0 = RationalFunction::with_poles(Polynomial::one(), vec![points[0]]);
    let mut gram = vec![vec![Complex64::new(0.0, 0.0); n_max + 1]; n_max + 1];
    let (mut max_offdiag, mut max_diag) = (0.0f64, 0.0f64);
    for n in 0..=n_max {
        for m in 0..=n_max {
            let g = sigma.apply(&pairs[n].0.mul(&pairs[m].1).mul(&x0))?;
            gram[n][m] = g;
            if n == m {
                max_diag = max_diag.max(g.norm());
            } else {
                max_offdiag = max_offdiag.max(g.norm());
            }
        }
    }
    Ok(BiortPiReport {
        gram,
        max_offdiag,
        max_diag,
    })
}
