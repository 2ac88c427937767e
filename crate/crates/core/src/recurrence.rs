//! Polynomials of the first and second kind generated by a Schur chain, the
//! convergents `R_n = Q_{n+1} / P_{n+1}` and the orthogonality relations they satisfy.
//!
//! Both families obey
//!
//! ```text
//! u_{j+1} = (a2_j l - a1_j) u_j - b_{j-1}^2 (l - z_{j-1})(l - conj z_{j-1}) u_{j-1}
//! ```
//!
//! with `P_0 = 1, P_1 = a2_0 l - a1_0` and `Q_0 = 0, Q_1 = -1`.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::measure::{Interval, Measure};
use crate::numerics::Polynomial;
use crate::schur::{SchurChain, SchurStep};

/// Allowed relative disagreement between the two convergent evaluations.
pub const PATH_TOL: f64 = 1e-9;
/// Absolute floor on the denominators of the `xi` ratios.
pub const MOMENT_FLOOR: f64 = 1e-13;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// `P_0..=P_{n+1}` and `Q_0..=Q_{n+1}` with real coefficients.
#[derive(Clone, Debug, PartialEq)]
pub struct PolyPair {
    pub p: Vec<Polynomial>,
    pub q: Vec<Polynomial>,
}

impl PolyPair {
    /// Index `n` of the last convergent `R_n` the pair supports.
    pub fn order(&self) -> usize {
        self.p.len() - 2
    }

    pub fn p_last(&self) -> &Polynomial {
        self.p.last().expect("pair holds at least P_0, P_1")
    }

    pub fn q_last(&self) -> &Polynomial {
        self.q.last().expect("pair holds at least Q_0, Q_1")
    }

    /// `lead(Q_{n+1}) / lead(P_{n+1})`, the coefficient of `1/l` in `R_n` at infinity.
    pub fn lead_ratio(&self) -> f64 {
        (self.q_last().leading() / self.p_last().leading()).re
    }
}

fn records(chain: &SchurChain, n: usize) -> Result<Vec<SchurStep>> {
    if chain.len() < n + 1 {
        return Err(Error::ChainTooShort {
            needed: n + 1,
            available: chain.len(),
        });
    }
    Ok(chain.records().take(n + 1).copied().collect())
}

/// Build `P_j, Q_j` for `j <= n + 1` from the first `n + 1` coefficient records.
pub fn build_polys(chain: &SchurChain, n: usize) -> Result<PolyPair> {
    let rec = records(chain, n)?;
    let lin = |s: &SchurStep| Polynomial::from_real(&[-s.a1, s.a2]);
    let quad = |s: &SchurStep| {
        Polynomial::conjugate_quadratic(s.z).scale(Complex64::new(s.b * s.b, 0.0))
    };
    let mut p = vec![Polynomial::one(), lin(&rec[0])];
    let mut q = vec![Polynomial::zero(), Polynomial::constant(-ONE)];
    for j in 1..=n {
        let d = lin(&rec[j]);
        let c = quad(&rec[j - 1]);
        let next_p = (&(&d * &p[j]) - &(&c * &p[j - 1])).into_real(1e-10)?;
        let next_q = (&(&d * &q[j]) - &(&c * &q[j - 1])).into_real(1e-10)?;
        p.push(next_p);
        q.push(next_q);
    }
    Ok(PolyPair { p, q })
}

/// Values `P_j(l), Q_j(l)` for `j = 0..=n+1` by the scalar recurrence.
pub fn recurrence_values(chain: &SchurChain, n: usize, lambda: Complex64) -> Result<(Vec<Complex64>, Vec<Complex64>)> {
    let rec = records(chain, n)?;
    let mut p = vec![ONE, rec[0].linear(lambda)];
    let mut q = vec![ZERO, -ONE];
    for j in 1..=n {
        let d = rec[j].linear(lambda);
        let c = rec[j - 1].quadratic(lambda);
        p.push(d * p[j] - c * p[j - 1]);
        q.push(d * q[j] - c * q[j - 1]);
    }
    Ok((p, q))
}

/// `Q_{n+1}(l) / P_{n+1}(l)` from the forward recurrence.
pub fn convergent_ratio(chain: &SchurChain, n: usize, lambda: Complex64) -> Result<Complex64> {
    let (p, q) = recurrence_values(chain, n, lambda)?;
    let den = p[n + 1];
    let r = q[n + 1] / den;
    if den.norm() == 0.0 || !r.is_finite() {
        return Err(Error::PoleOfConvergent(lambda));
    }
    Ok(r)
}

/// The continued fraction `-1/(d_0 + N_0 (-1/(d_1 + ...)))` evaluated bottom-up from tail 0.
pub fn convergent_cf(chain: &SchurChain, n: usize, lambda: Complex64) -> Result<Complex64> {
    let rec = records(chain, n)?;
    // None stands for an infinite partial denominator
    let mut den = Some(rec[n].linear(lambda));
    for j in (0..n).rev() {
        let d = rec[j].linear(lambda);
        den = Some(match den {
            Some(x) if x.norm() == 0.0 => {
                den = None;
                continue;
            }
            Some(x) => d - rec[j].quadratic(lambda) / x,
            None => d,
        });
    }
    match den {
        Some(x) if x.norm() == 0.0 => Err(Error::PoleOfConvergent(lambda)),
        Some(x) => Ok(-1.0 / x),
        None => Ok(ZERO),
    }
}

/// `R_n(l)`, computed as a polynomial ratio and cross-checked against the continued fraction.
pub fn eval_convergent(chain: &SchurChain, n: usize, lambda: Complex64) -> Result<Complex64> {
    let ratio = convergent_ratio(chain, n, lambda)?;
    let fraction = convergent_cf(chain, n, lambda)?;
    if (ratio - fraction).norm() > PATH_TOL * (1.0 + ratio.norm()) {
        return Err(Error::PathDisagreement { ratio, fraction });
    }
    Ok(ratio)
}

/// Largest relative deviation `|R_m - phi| / (1 + |phi|)` over `probes` for a terminated
/// chain, where `m` is the index of the terminal record.
pub fn check_terminal_recovery(chain: &SchurChain, probes: &[Complex64]) -> Result<f64> {
    if !chain.is_terminated() {
        return Err(Error::InvalidData("chain has not terminated".into()));
    }
    let m = chain.len() - 1;
    probes.iter().try_fold(0.0f64, |worst, &l| {
        let r = eval_convergent(chain, m, l)?;
        let f = chain.measure().eval_markov(l)?;
        Ok(worst.max((r - f).norm() / (1.0 + f.norm())))
    })
}

fn hat_scale(chain: &SchurChain, j: usize, lambda: Complex64) -> Result<Complex64> {
    if chain.steps().len() < j {
        return Err(Error::ChainTooShort {
            needed: j,
            available: chain.steps().len(),
        });
    }
    chain.steps()[..j].iter().try_fold(ONE, |acc, s| {
        if s.z == lambda {
            return Err(Error::NodeCollision(lambda));
        }
        Ok(acc * s.b * (s.z - lambda))
    })
}

/// `u_j / (b_0 ... b_{j-1} (z_0 - l) ... (z_{j-1} - l))`.
pub fn hat_normalize(chain: &SchurChain, u: Complex64, j: usize, lambda: Complex64) -> Result<Complex64> {
    Ok(u / hat_scale(chain, j, lambda)?)
}

/// `hat P_j(l)` for `j = 0..=n+1`; needs nondegenerate steps `0..=n`.
pub fn hat_values(chain: &SchurChain, n: usize, lambda: Complex64) -> Result<Vec<Complex64>> {
    let (p, _) = recurrence_values(chain, n, lambda)?;
    let mut scale = ONE;
    let mut out = Vec::with_capacity(n + 2);
    for (j, v) in p.into_iter().enumerate() {
        out.push(v / scale);
        if j <= n {
            let s = chain.steps().get(j).ok_or(Error::ChainTooShort {
                needed: n + 1,
                available: chain.steps().len(),
            })?;
            if s.z == lambda {
                return Err(Error::NodeCollision(lambda));
            }
            scale *= s.b * (s.z - lambda);
        }
    }
    Ok(out)
}

/// Relative residual of the renormalized three-term relation
/// `b_j (z_j - l) u_{j+1} - (a2_j l - a1_j) u_j + b_{j-1} (conj z_{j-1} - l) u_{j-1}`.
pub fn hat_recurrence_residual(chain: &SchurChain, j: usize, lambda: Complex64) -> Result<f64> {
    let h = hat_values(chain, j, lambda)?;
    let s = &chain.steps()[j];
    let mut terms = vec![s.b * (s.z - lambda) * h[j + 1], -s.linear(lambda) * h[j]];
    if j > 0 {
        let p = &chain.steps()[j - 1];
        terms.push(p.b * (p.z.conj() - lambda) * h[j - 1]);
    }
    let scale: f64 = terms.iter().map(|t| t.norm()).sum();
    Ok(terms.iter().sum::<Complex64>().norm() / scale.max(f64::MIN_POSITIVE))
}

/// Normalized residuals of the two orthogonality relations for `P_{n+1}`.
#[derive(Clone, Debug, PartialEq)]
pub struct NpOrthogonality {
    /// `int t^j P_{n+1} dsigma / prod_k |t - z_k|^2`, `j = 0..=n`.
    pub ort: Vec<f64>,
    /// `int hat P_{n+1}(t) / (t - conj z_j) dsigma`, `j = 0..=n`.
    pub ort2: Vec<f64>,
}

impl NpOrthogonality {
    pub fn max_residual(&self) -> f64 {
        self.ort.iter().chain(&self.ort2).copied().fold(0.0, f64::max)
    }
}

/// Each residual is divided by the integral of the absolute integrand.
pub fn check_np_orthogonality(chain: &SchurChain, m: &Measure, n: usize) -> Result<NpOrthogonality> {
    if chain.steps().len() <= n {
        return Err(Error::ChainTooShort {
            needed: n + 1,
            available: chain.steps().len(),
        });
    }
    let pair = build_polys(chain, n)?;
    let p = pair.p_last();
    let steps = &chain.steps()[..=n];
    let omega = |t: f64| steps.iter().map(|s| (t - s.z).norm_sqr()).product::<f64>();
    let hat_den = |t: f64| {
        steps
            .iter()
            .map(|s| s.b * (s.z - t))
            .product::<Complex64>()
    };
    let ratio = |f: &dyn Fn(f64) -> Complex64| {
        let value = m.integrate(f).norm();
        let scale = m.integrate_real(|t| f(t).norm());
        if scale == 0.0 { 0.0 } else { value / scale }
    };
    let tc = |t: f64| Complex64::new(t, 0.0);
    let ort = (0..=n)
        .map(|j| ratio(&|t| tc(t).powi(j as i32) * p.eval(tc(t)) / omega(t)))
        .collect();
    let ort2 = steps
        .iter()
        .map(|s| ratio(&|t| p.eval(tc(t)) / hat_den(t) / (t - s.z.conj())))
        .collect();
    Ok(NpOrthogonality { ort, ort2 })
}

/// `xi_0 = 0` and
/// `xi_j = (int t^{j+1} dsigma / prod_{k<=j} |t-z_k|^2) / (int t^j dsigma / prod_{k<j} |t-z_k|^2)`.
pub fn xi_sequence(chain: &SchurChain, m: &Measure, n: usize) -> Result<Vec<f64>> {
    let nodes = chain.nodes().as_slice();
    if nodes.len() <= n {
        return Err(Error::NoMoreNodes(nodes.len()));
    }
    let omega = |t: f64, upto: usize| nodes[..upto].iter().map(|z| (t - z).norm_sqr()).product::<f64>();
    let mut xi = vec![0.0];
    for j in 1..=n {
        let num = m.integrate_real(|t| t.powi(j as i32 + 1) / omega(t, j + 1));
        let den = m.integrate_real(|t| t.powi(j as i32) / omega(t, j));
        if den.abs() < MOMENT_FLOOR {
            return Err(Error::DegenerateMoment(j));
        }
        xi.push(num / den);
    }
    Ok(xi)
}

/// Zeros of `P_{n+1}` and `Q_{n+1}` with their location and interlacing status.
#[derive(Clone, Debug, PartialEq)]
pub struct ZerosReport {
    pub p_zeros: Vec<f64>,
    pub q_zeros: Vec<f64>,
    /// Largest imaginary part among all computed zeros.
    pub max_imag: f64,
    /// Largest distance of a zero of `P_{n+1}` outside the interval.
    pub outside: f64,
    /// Strict alternation `p_0 < q_0 < p_1 < ... < q_{n-1} < p_n`.
    pub interlaced: bool,
}

pub fn check_zeros(pair: &PolyPair, interval: Interval) -> Result<ZerosReport> {
    let real_sorted = |p: &Polynomial| -> Result<(Vec<f64>, f64)> {
        if p.degree().unwrap_or(0) == 0 {
            return Ok((Vec::new(), 0.0));
        }
        let roots = p.roots()?;
        let im = roots.iter().map(|r| r.im.abs()).fold(0.0, f64::max);
        let mut re: Vec<f64> = roots.iter().map(|r| r.re).collect();
        re.sort_by(f64::total_cmp);
        Ok((re, im))
    };
    let (p_zeros, ip) = real_sorted(pair.p_last())?;
    let (q_zeros, iq) = real_sorted(pair.q_last())?;
    let outside = p_zeros
        .iter()
        .map(|&x| (interval.alpha - x).max(x - interval.beta).max(0.0))
        .fold(0.0, f64::max);
    let interlaced = q_zeros.len() + 1 == p_zeros.len()
        && q_zeros
            .iter()
            .enumerate()
            .all(|(k, &q)| p_zeros[k] < q && q < p_zeros[k + 1]);
    Ok(ZerosReport {
        p_zeros,
        q_zeros,
        max_imag: ip.max(iq),
        outside,
        interlaced,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::NodeSequence;
    use crate::numerics::c64;
    use crate::schur::{run_chain, StepField};

    fn two_point_chain() -> SchurChain {
        let m = Measure::discrete(Interval::new(-1.0, 1.0).unwrap(), vec![-1.0, 1.0], vec![0.5, 0.5]).unwrap();
        run_chain(&m, &NodeSequence::vertical(1.0, 1.0, 0.0, 4, 0.5).unwrap(), 4).unwrap()
    }

    fn cheb_chain(n: usize) -> SchurChain {
        run_chain(&Measure::chebyshev(), &NodeSequence::vertical(1.0, 1.0, 0.0, n, 0.5).unwrap(), n).unwrap()
    }

    fn close(a: Complex64, b: Complex64, tol: f64) -> bool {
        (a - b).norm() <= tol
    }

    #[test]
    fn two_point_polynomials() {
        let pair = build_polys(&two_point_chain(), 1).unwrap();
        let re = |p: &Polynomial| p.coeffs().iter().map(|c| c.re).collect::<Vec<_>>();
        let p1 = re(&pair.p[1]);
        assert!(p1[0].abs() < 1e-14 && (p1[1] - 2.0).abs() < 1e-14);
        assert_eq!(re(&pair.q[1]), vec![-1.0]);
        let p2 = re(&pair.p[2]);
        assert!((p2[0] + 1.0).abs() < 1e-13 && p2[1].abs() < 1e-13 && (p2[2] - 1.0).abs() < 1e-13);
        let q2 = re(&pair.q[2]);
        assert!(q2[0].abs() < 1e-13 && (q2[1] + 1.0).abs() < 1e-13);
        let i = c64(0.0, 1.0);
        assert!(close(pair.q[2].eval(i) / pair.p[2].eval(i), c64(0.0, 0.5), 1e-13));
    }

    #[test]
    fn two_point_convergents() {
        let chain = two_point_chain();
        assert!(close(eval_convergent(&chain, 0, c64(0.0, 1.0)).unwrap(), c64(0.0, 0.5), 1e-14));
        for l in [c64(0.3, 0.2), c64(-4.0, 1.0), c64(0.0, -2.0)] {
            let want = l / (1.0 - l * l);
            assert!(close(eval_convergent(&chain, 1, l).unwrap(), want, 1e-12));
        }
        let probes = [c64(0.5, 0.5), c64(2.0, -1.0), c64(0.0, 3.0)];
        assert!(check_terminal_recovery(&chain, &probes).unwrap() < 1e-12);
        let exact = chain.perturbed(0, StepField::A1, -chain.steps()[0].a1).unwrap();
        assert!(matches!(eval_convergent(&exact, 0, c64(0.0, 0.0)), Err(Error::PoleOfConvergent(_))));
        assert!(matches!(eval_convergent(&chain, 2, c64(0.0, 1.0)), Err(Error::ChainTooShort { .. })));
    }

    #[test]
    fn cf_handles_infinite_partial_denominator() {
        // d_1(l) = 0 at l = a1/a2 makes the inner tail infinite
        let chain = two_point_chain();
        let chain = chain.perturbed(1, StepField::A1, -chain.terminal().unwrap().a1).unwrap();
        let l = c64(0.0, 0.0);
        assert!(matches!(convergent_cf(&chain, 1, l), Ok(v) if v.norm() == 0.0));
    }

    #[test]
    fn interpolation_and_symmetry() {
        let chain = cheb_chain(9);
        let m = chain.measure().clone();
        for n in 0..9 {
            for k in 0..=n {
                let z = chain.nodes().get(k).unwrap();
                let r = eval_convergent(&chain, n, z).unwrap();
                assert!(close(r, m.eval_markov(z).unwrap(), 1e-8), "n={n} k={k}");
            }
            let l = c64(0.7, 1.9);
            let a = eval_convergent(&chain, n, l).unwrap();
            let b = eval_convergent(&chain, n, l.conj()).unwrap();
            assert!(close(a.conj(), b, 1e-13));
        }
    }

    #[test]
    fn degrees_and_leading_terms() {
        let chain = cheb_chain(8);
        let pair = build_polys(&chain, 7).unwrap();
        for j in 1..=8 {
            assert_eq!(pair.p[j].degree(), Some(j));
            assert_eq!(pair.q[j].degree(), Some(j - 1));
            assert!(pair.p[j].imag_residue() == 0.0);
        }
        for j in 1..8 {
            let s = &chain.steps()[j];
            let b2 = chain.steps()[j - 1].b.powi(2);
            let want = s.a2 * pair.p[j].leading() - b2 * pair.p[j - 1].leading();
            assert!(close(pair.p[j + 1].leading(), want, 1e-12 * want.norm()));
        }
        // R_n ~ lead ratio / l at infinity
        let big = c64(0.0, 1e6);
        let r = eval_convergent(&chain, 7, big).unwrap();
        assert!(close(r * big, c64(pair.lead_ratio(), 0.0), 1e-5));
    }

    #[test]
    fn hat_normalization() {
        let chain = two_point_chain();
        let l = c64(0.0, 2.0);
        assert_eq!(hat_normalize(&chain, c64(3.0, 1.0), 0, l).unwrap(), c64(3.0, 1.0));
        let p1 = c64(0.0, 4.0);
        assert!(close(hat_normalize(&chain, p1, 1, l).unwrap(), c64(-4.0, 0.0), 1e-14));
        assert_eq!(
            hat_normalize(&chain, p1, 1, c64(0.0, 1.0)),
            Err(Error::NodeCollision(c64(0.0, 1.0)))
        );

        let chain = cheb_chain(8);
        for j in 0..7 {
            for l in [c64(0.2, 0.3), c64(-3.0, 1.0), c64(1.0, -0.5)] {
                assert!(hat_recurrence_residual(&chain, j, l).unwrap() < 1e-12, "j={j}");
            }
        }
    }

    #[test]
    fn two_point_orthogonality_order_zero() {
        let chain = two_point_chain();
        let rep = check_np_orthogonality(&chain, chain.measure(), 0).unwrap();
        assert!(rep.ort[0] < 1e-15);
        assert!(rep.ort2[0] < 1e-15);
    }

    #[test]
    fn chebyshev_orthogonality() {
        let chain = cheb_chain(11);
        for n in 0..=10 {
            let rep = check_np_orthogonality(&chain, chain.measure(), n).unwrap();
            assert!(rep.max_residual() < 1e-8, "n={n}: {rep:?}");
        }
        // one condition past the range is not an orthogonality relation
        let pair = build_polys(&chain, 3).unwrap();
        let m = chain.measure();
        let w = |t: f64| chain.steps()[..4].iter().map(|s| (t - s.z).norm_sqr()).product::<f64>();
        let beyond = m.integrate_real(|t| t.powi(4) * pair.p[4].eval(c64(t, 0.0)).re / w(t));
        assert!(beyond.abs() > 1e-6);
    }

    #[test]
    fn xi_examples() {
        let chain = two_point_chain();
        assert_eq!(xi_sequence(&chain, chain.measure(), 0).unwrap(), vec![0.0]);
        assert_eq!(xi_sequence(&chain, chain.measure(), 1), Err(Error::DegenerateMoment(1)));

        let m = Measure::chebyshev();
        let nodes = NodeSequence::vertical(1.0, 1.0, 0.3, 3, 0.5).unwrap();
        let chain = run_chain(&m, &nodes, 3).unwrap();
        let xi = xi_sequence(&chain, &m, 2).unwrap();
        assert_eq!(xi[0], 0.0);
        assert!(xi[1].is_finite() && xi[2].is_finite());
    }

    #[test]
    fn zeros_interlace_inside_interval() {
        let chain = cheb_chain(12);
        for n in [0, 3, 7, 11] {
            let rep = check_zeros(&build_polys(&chain, n).unwrap(), chain.interval()).unwrap();
            assert_eq!(rep.p_zeros.len(), n + 1);
            assert!(rep.outside <= 1e-8, "n={n}: {rep:?}");
            assert!(rep.max_imag < 1e-8, "n={n}: {rep:?}");
            assert!(rep.interlaced, "n={n}: {rep:?}");
        }
    }
}
