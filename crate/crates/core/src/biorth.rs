//! R_II recurrence data, the normalization constants `kappa_n`, and the
//! biorthogonal rational functions `U_n`, `V_n` built from them.
//!
//! The recurrence is
//!
//! ```text
//! P_{n+1} + (alpha_n z + beta_n) P_n + r_n (z - a_n)(z - b_n) P_{n-1} = 0,
//! P_0 = 1, P_1 = z - beta_0,
//! ```
//!
//! with `alpha_0 = -1` and `alpha_n + r_n + 1 = 0`, so every `P_n` is monic.
//! The constants obey `kappa_{n+1} + alpha_n kappa_n + r_n kappa_{n-1} = 0`.
//!
//! Index zero conventions: the pole slots `a[0]`, `b[0]` and `r[0]` carry
//! arbitrary parameters that only enter the `n = 0` step of the first-order
//! system. Chain-built data uses `a_0 = alpha - 1`, `b_0 = beta + 1`, `r_0 = 1`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::measure::Measure;
use crate::numerics::{dense_det, Polynomial, RationalFunction};
use crate::schur::SchurChain;

/// Tolerance on `alpha_n + r_n + 1 = 0`.
pub const RESTRICTION_TOL: f64 = 1e-10;
/// Relative closeness at which `kappa_0 = kappa_1` or `xi_n = 1` counts as degenerate.
pub const DEGENERACY_TOL: f64 = 1e-12;
/// Largest order for which the bordered moment determinants are evaluated.
pub const DETERMINANT_MAX_ORDER: usize = 12;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

fn c64(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// How the two free constants `kappa_0`, `kappa_1` are obtained.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum KappaMode {
    Supplied(Complex64, Complex64),
    /// `kappa_n = int p_n(t) t^n / (A_n(t) B_n(t)) d sigma(t)` against the chain measure.
    Quadrature,
}

/// Coefficients of an R_II recurrence of length `N`.
///
/// `alpha`, `beta`, `r` are indexed `0..N`, the poles `a`, `b` are indexed `0..=N`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct R2Data {
    pub alpha: Vec<Complex64>,
    pub beta: Vec<Complex64>,
    pub r: Vec<Complex64>,
    pub a: Vec<Complex64>,
    pub b: Vec<Complex64>,
    pub kappa0: Complex64,
    pub kappa1: Complex64,
}

impl R2Data {
    /// Build and validate raw data. `r[0]` is a free parameter (commonly `1`).
    pub fn new(
        alpha: Vec<Complex64>,
        beta: Vec<Complex64>,
        r: Vec<Complex64>,
        a: Vec<Complex64>,
        b: Vec<Complex64>,
        kappa0: Complex64,
        kappa1: Complex64,
    ) -> Result<Self> {
        let data = Self {
            alpha,
            beta,
            r,
            a,
            b,
            kappa0,
            kappa1,
        };
        data.validate()?;
        Ok(data)
    }

    /// Data with `alpha_n` forced by the monic restriction from the given `r_n`.
    pub fn monic(
        beta: Vec<Complex64>,
        r: Vec<Complex64>,
        a: Vec<Complex64>,
        b: Vec<Complex64>,
        kappa0: Complex64,
        kappa1: Complex64,
    ) -> Result<Self> {
        let alpha = (0..r.len())
            .map(|n| if n == 0 { -ONE } else { -ONE - r[n] })
            .collect();
        Self::new(alpha, beta, r, a, b, kappa0, kappa1)
    }

    /// Number of recurrence rows `N`; polynomials run through `P_N`.
    pub fn len(&self) -> usize {
        self.alpha.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alpha.is_empty()
    }

    /// Largest `|alpha_n + r_n + 1|` (with `|alpha_0 + 1|` at `n = 0`).
    pub fn restriction_defect(&self) -> f64 {
        self.alpha
            .iter()
            .enumerate()
            .map(|(n, &al)| if n == 0 { (al + ONE).norm() } else { (al + self.r[n] + ONE).norm() })
            .fold(0.0, f64::max)
    }

    fn validate(&self) -> Result<()> {
        let n = self.alpha.len();
        if self.beta.len() != n || self.r.len() != n {
            return Err(Error::Shape(format!(
                "alpha, beta, r lengths {}, {}, {}",
                n,
                self.beta.len(),
                self.r.len()
            )));
        }
        if self.a.len() != n + 1 || self.b.len() != n + 1 {
            return Err(Error::Shape(format!("need {} poles per side", n + 1)));
        }
        if self.restriction_defect() > RESTRICTION_TOL {
            return Err(Error::InvalidData(format!(
                "alpha_n + r_n + 1 = 0 violated by {:e}",
                self.restriction_defect()
            )));
        }
        if let Some(k) = (1..n).find(|&k| self.r[k] == ZERO) {
            return Err(Error::InvalidData(format!("r_{k} vanishes")));
        }
        if let Some(k) = (0..=n).find(|&k| self.a[k] == self.b[k]) {
            return Err(Error::EqualPoles(k));
        }
        Ok(())
    }

    /// `kappa_0 .. kappa_N` from the two free constants by the three-term recursion.
    pub fn kappa_sequence(&self) -> Vec<Complex64> {
        let n = self.len();
        let mut k = vec![self.kappa0, self.kappa1];
        for j in 1..n {
            k.push(-self.alpha[j] * k[j] - self.r[j] * k[j - 1]);
        }
        k.truncate(n + 1);
        k
    }

    /// Monic `P_0 .. P_N`.
    pub fn polynomials(&self) -> Vec<Polynomial> {
        let n = self.len();
        let mut p = vec![Polynomial::one()];
        if n == 0 {
            return p;
        }
        p.push(Polynomial::new(vec![-self.beta[0], ONE]));
        for j in 1..n {
            let lin = Polynomial::new(vec![self.beta[j], self.alpha[j]]);
            let quad = Polynomial::from_roots(&[self.a[j], self.b[j]]).scale(self.r[j]);
            let next = -&(&(&lin * &p[j]) + &(&quad * &p[j - 1]));
            p.push(next);
        }
        p
    }
}

fn kappa_degenerate(k0: Complex64, k1: Complex64) -> bool {
    (k0 - k1).norm() <= DEGENERACY_TOL * k0.norm().max(k1.norm()).max(f64::MIN_POSITIVE)
}

/// Leading coefficients `c_0 .. c_N` of the chain polynomials, with
/// `c_{n+1} = a2_n c_n - b_{n-1}^2 c_{n-1}`.
pub fn leading_coefficients(chain: &SchurChain, n: usize) -> Result<Vec<f64>> {
    if chain.len() < n {
        return Err(Error::ChainTooShort {
            needed: n,
            available: chain.len(),
        });
    }
    let rec: Vec<_> = chain.records().take(n).collect();
    let mut c = vec![1.0];
    for j in 0..n {
        let prev = if j == 0 { 0.0 } else { rec[j - 1].b.powi(2) * c[j - 1] };
        c.push(rec[j].a2 * c[j] - prev);
    }
    Ok(c)
}

/// `kappa_n` by integration against the measure, with monic `p_n` and the
/// pole pattern `a_k = z_{k-1}`, `b_k = conj z_{k-1}`.
pub fn kappa_by_quadrature(m: &Measure, p: &Polynomial, poles_a: &[Complex64], poles_b: &[Complex64]) -> Complex64 {
    let n = p.degree().unwrap_or(0);
    m.integrate(|t| {
        let tc = c64(t);
        let den: Complex64 = poles_a.iter().zip(poles_b).map(|(&a, &b)| (tc - a) * (tc - b)).product();
        p.eval(tc) * tc.powi(n as i32) / den
    })
}

/// Relative gap between the recursive `kappa_n` of the system and `kappa_n` integrated
/// directly against `m`, for every `n`. The forward recursion amplifies rounding
/// geometrically, so the gap grows with `n`.
pub fn kappa_quadrature_defect(sys: &BiorthSystem, m: &Measure) -> Vec<f64> {
    let d = &sys.data;
    (0..sys.kappa.len())
        .map(|n| {
            let q = kappa_by_quadrature(m, &sys.p[n], &d.a[1..=n], &d.b[1..=n]);
            (q - sys.kappa[n]).norm() / q.norm().max(f64::MIN_POSITIVE)
        })
        .collect()
}

/// Renormalize the first `n` chain records to monic R_II data of length `n`.
pub fn from_chain(chain: &SchurChain, n: usize, mode: KappaMode) -> Result<R2Data> {
    let c = leading_coefficients(chain, n)?;
    if let Some(k) = c.iter().position(|&x| x == 0.0) {
        return Err(Error::DegenerateLeading(k));
    }
    let rec: Vec<_> = chain.records().take(n).copied().collect();
    let mut alpha = Vec::with_capacity(n);
    let mut beta = Vec::with_capacity(n);
    let mut r = Vec::with_capacity(n);
    for j in 0..n {
        alpha.push(c64(-rec[j].a2 * c[j] / c[j + 1]));
        beta.push(c64(rec[j].a1 * c[j] / c[j + 1]));
        r.push(if j == 0 {
            ONE
        } else {
            c64(rec[j - 1].b.powi(2) * c[j - 1] / c[j + 1])
        });
    }
    let iv = chain.interval();
    let nodes = chain.nodes().as_slice();
    if nodes.len() < n {
        return Err(Error::InvalidNodes(format!("{n} nodes needed, {} available", nodes.len())));
    }
    let mut a = vec![c64(iv.alpha - 1.0)];
    let mut b = vec![c64(iv.beta + 1.0)];
    for z in &nodes[..n] {
        a.push(*z);
        b.push(z.conj());
    }
    let (kappa0, kappa1) = match mode {
        KappaMode::Supplied(k0, k1) => (k0, k1),
        KappaMode::Quadrature => {
            let m = chain.measure();
            let k0 = c64(m.mass());
            let k1 = if n == 0 {
                k0
            } else {
                let p1 = Polynomial::new(vec![-beta[0], ONE]);
                kappa_by_quadrature(m, &p1, &a[1..2], &b[1..2])
            };
            (k0, k1)
        }
    };
    if n > 0 && kappa_degenerate(kappa0, kappa1) {
        return Err(Error::KappaDegenerate);
    }
    R2Data::new(alpha, beta, r, a, b, kappa0, kappa1)
}

/// A linear functional on rational functions with prescribed simple poles.
pub trait Functional {
    fn apply(&self, f: &RationalFunction) -> Result<Complex64>;
}

/// Integration against a measure.
pub struct MeasureFunctional<'a>(pub &'a Measure);

impl Functional for MeasureFunctional<'_> {
    fn apply(&self, f: &RationalFunction) -> Result<Complex64> {
        self.0.integrate_rational(f)
    }
}

/// Linear extension of a moment table `c[n][m] = sigma{1/(A_n B_m)}` to
/// `span{1, 1/(z - a_i), 1/(z - b_j)}` by partial fractions.
///
/// The poles `a_1..a_K`, `b_1..b_K` must be pairwise distinct across both lists.
pub struct TableFunctional {
    mass: Complex64,
    simple: Vec<(Complex64, Complex64)>,
}

impl TableFunctional {
    /// `a`, `b` hold `a_1..a_K`, `b_1..b_K`; `table` is at least `(K+1) x (K+1)`.
    pub fn new(table: &DMatrix<Complex64>, a: &[Complex64], b: &[Complex64]) -> Result<Self> {
        let k = a.len();
        if b.len() != k || table.nrows() <= k || table.ncols() <= k {
            return Err(Error::Shape("moment table smaller than pole lists".into()));
        }
        let all: Vec<_> = a.iter().chain(b).copied().collect();
        for (i, x) in all.iter().enumerate() {
            if all[i + 1..].contains(x) {
                return Err(Error::DuplicatePoints);
            }
        }
        let mut simple = Vec::with_capacity(2 * k);
        for (poles, moments) in [
            (a, (1..=k).map(|n| table[(n, 0)]).collect::<Vec<_>>()),
            (b, (1..=k).map(|m| table[(0, m)]).collect()),
        ] {
            // 1/A_n = sum_{i<=n} w_{ni} / (z - a_i), w_{ni} = 1 / prod_{j<=n, j!=i} (a_i - a_j)
            let mut s: Vec<Complex64> = Vec::with_capacity(k);
            for n in 0..k {
                let w = |i: usize| -> Complex64 {
                    let d: Complex64 = (0..=n).filter(|&j| j != i).map(|j| poles[i] - poles[j]).product();
                    ONE / d
                };
                let known: Complex64 = (0..n).map(|i| w(i) * s[i]).sum();
                s.push((moments[n] - known) / w(n));
            }
            simple.extend(poles.iter().copied().zip(s));
        }
        Ok(Self {
            mass: table[(0, 0)],
            simple,
        })
    }
}

impl Functional for TableFunctional {
    fn apply(&self, f: &RationalFunction) -> Result<Complex64> {
        let pf = f.partial_fractions()?;
        let mut total = pf.constant * self.mass;
        for (pole, res) in pf.terms {
            let (_, val) = self
                .simple
                .iter()
                .min_by(|x, y| (x.0 - pole).norm().total_cmp(&(y.0 - pole).norm()))
                .ok_or_else(|| Error::InvalidData("functional has no poles".into()))?;
            let nearest = self.simple.iter().map(|x| (x.0 - pole).norm()).fold(f64::INFINITY, f64::min);
            if nearest > 1e-12 * (1.0 + pole.norm()) {
                return Err(Error::InvalidData(format!("pole {pole} outside the table")));
            }
            total += res * val;
        }
        Ok(total)
    }
}

/// All sequences of the biorthogonal construction through index `N`.
#[derive(Clone, Debug)]
pub struct BiorthSystem {
    pub data: R2Data,
    pub p: Vec<Polynomial>,
    pub kappa: Vec<Complex64>,
    pub xi: Vec<Complex64>,
    pub u: Vec<RationalFunction>,
    pub v: Vec<RationalFunction>,
    pub s: Vec<Polynomial>,
    pub t: Vec<Polynomial>,
    pub h: Vec<Complex64>,
}

impl BiorthSystem {
    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// `R^{(1)}_n(z) = P_n(z)/A_n(z)`.
    pub fn r1(&self, n: usize, z: Complex64) -> Complex64 {
        let den: Complex64 = self.data.a[1..=n].iter().map(|&a| z - a).product();
        self.p[n].eval(z) / den
    }

    /// `R^{(2)}_n(z) = P_n(z)/B_n(z)`.
    pub fn r2(&self, n: usize, z: Complex64) -> Complex64 {
        let den: Complex64 = self.data.b[1..=n].iter().map(|&b| z - b).product();
        self.p[n].eval(z) / den
    }

    /// `U_n = R^{(1)}_n - xi_n R^{(1)}_{n-1}` evaluated from the definition.
    pub fn u_direct(&self, n: usize, z: Complex64) -> Complex64 {
        if n == 0 {
            return ONE;
        }
        self.r1(n, z) - self.xi[n] * self.r1(n - 1, z)
    }

    pub fn v_direct(&self, n: usize, z: Complex64) -> Complex64 {
        if n == 0 {
            return ONE;
        }
        self.r2(n, z) - self.xi[n] * self.r2(n - 1, z)
    }

    /// `xi_0` under the convention that makes the first-order system valid at `n = 0`.
    pub fn xi0_extended(&self) -> Complex64 {
        self.data.r[0] * self.kappa[0] / (self.kappa[0] - self.kappa[1])
    }
}

/// Build `P, kappa, xi, U, V, S, T, h` through index `N`.
pub fn build_system(data: R2Data) -> Result<BiorthSystem> {
    data.validate()?;
    let n = data.len();
    if n > 0 && kappa_degenerate(data.kappa0, data.kappa1) {
        return Err(Error::KappaDegenerate);
    }
    let p = data.polynomials();
    let kappa = data.kappa_sequence();
    if let Some(k) = kappa.iter().position(|k| *k == ZERO) {
        return Err(Error::DegenerateMoment(k));
    }
    let mut xi = vec![ZERO];
    let mut h = vec![kappa[0]];
    for j in 1..=n {
        let x = kappa[j] / kappa[j - 1];
        if (x - ONE).norm() <= DEGENERACY_TOL {
            return Err(Error::XiUnit(j));
        }
        xi.push(x);
        h.push(x * (kappa[j - 1] - kappa[j]));
    }
    let mut s = vec![Polynomial::one()];
    let mut t = vec![Polynomial::one()];
    let mut u = vec![RationalFunction::polynomial(Polynomial::one())];
    let mut v = vec![RationalFunction::polynomial(Polynomial::one())];
    for j in 1..=n {
        let scale = ONE / (ONE - xi[j]);
        let sj = (&p[j] - &(&Polynomial::linear(data.a[j]) * &p[j - 1]).scale(xi[j])).scale(scale);
        let tj = (&p[j] - &(&Polynomial::linear(data.b[j]) * &p[j - 1]).scale(xi[j])).scale(scale);
        // U_j = (1 - xi_j) S_j / A_j, the form consistent with U_j = R_j - xi_j R_{j-1}.
        u.push(RationalFunction::with_poles(sj.scale(ONE - xi[j]), data.a[1..=j].to_vec()));
        v.push(RationalFunction::with_poles(tj.scale(ONE - xi[j]), data.b[1..=j].to_vec()));
        s.push(sj);
        t.push(tj);
    }
    Ok(BiorthSystem {
        data,
        p,
        kappa,
        xi,
        u,
        v,
        s,
        t,
        h,
    })
}

/// Gram matrix `G_{nm} = sigma{U_n V_m}` compared against `h_n delta_{nm}`.
#[derive(Clone, Debug, Serialize)]
pub struct GramReport {
    pub gram: Vec<Vec<Complex64>>,
    pub h: Vec<Complex64>,
    pub max_offdiag: f64,
    pub max_h: f64,
    pub max_diag_rel_error: f64,
}

impl GramReport {
    /// Off-diagonal entries below `off_tol * max|h|` and diagonal within `diag_tol` relative.
    pub fn passes(&self, off_tol: f64, diag_tol: f64) -> bool {
        self.max_offdiag <= off_tol * self.max_h && self.max_diag_rel_error <= diag_tol
    }
}

pub fn check_biorthogonality(sys: &BiorthSystem, sigma: &dyn Functional, n: usize) -> Result<GramReport> {
    if n > sys.len() {
        return Err(Error::Shape(format!("system has order {}, asked for {n}", sys.len())));
    }
    let mut gram = vec![vec![ZERO; n + 1]; n + 1];
    let mut max_offdiag: f64 = 0.0;
    let mut max_diag_rel_error: f64 = 0.0;
    for i in 0..=n {
        for j in 0..=n {
            let g = sigma.apply(&sys.u[i].mul(&sys.v[j]))?;
            gram[i][j] = g;
            if i == j {
                max_diag_rel_error = max_diag_rel_error.max((g - sys.h[i]).norm() / sys.h[i].norm());
            } else {
                max_offdiag = max_offdiag.max(g.norm());
            }
        }
    }
    let max_h = sys.h[..=n].iter().map(|h| h.norm()).fold(0.0, f64::max);
    Ok(GramReport {
        gram,
        h: sys.h[..=n].to_vec(),
        max_offdiag,
        max_h,
        max_diag_rel_error,
    })
}

/// Copy of the system with `xi_k` replaced and `U_k`, `V_k` rebuilt, for negative controls.
pub fn with_perturbed_xi(sys: &BiorthSystem, k: usize, delta: Complex64) -> BiorthSystem {
    let mut out = sys.clone();
    let x = sys.xi[k] + delta;
    out.xi[k] = x;
    let scale = ONE / (ONE - x);
    let d = &sys.data;
    let sk = (&sys.p[k] - &(&Polynomial::linear(d.a[k]) * &sys.p[k - 1]).scale(x)).scale(scale);
    let tk = (&sys.p[k] - &(&Polynomial::linear(d.b[k]) * &sys.p[k - 1]).scale(x)).scale(scale);
    out.u[k] = RationalFunction::with_poles(sk.scale(ONE - x), d.a[1..=k].to_vec());
    out.v[k] = RationalFunction::with_poles(tk.scale(ONE - x), d.b[1..=k].to_vec());
    out.s[k] = sk;
    out.t[k] = tk;
    out
}

/// `Delta_n = det [c_{ij}]_{i,j<n}`, with `Delta_0 = 1`.
pub fn delta(table: &DMatrix<Complex64>, n: usize) -> Result<Complex64> {
    dense_det(&table.view((0, 0), (n, n)).into_owned())
}

/// Upper triangular factor `R` of `G = QR`, where `G[s][k] = sqrt(w_s) / A_k(t_s)`
/// samples the basis functions at the nodes of a discrete measure.
///
/// For such a measure the moment table is the Gram matrix `c_{ki} = (R^H R)_{ik}`,
/// so `Delta_n = prod_{i<n} |R_ii|^2` and the bordered determinants reduce to
/// triangular solves with `R` without ever forming the table.
#[derive(Clone, Debug)]
pub struct GramFactor {
    r: DMatrix<Complex64>,
}

impl GramFactor {
    /// Factor for the basis `1/A_0 .. 1/A_size` with `A_k = prod_{j=1..k} (t - a_j)`.
    /// The poles `b_k` must be the conjugates of `a_k`.
    pub fn new(m: &Measure, data: &R2Data, size: usize) -> Result<Self> {
        if size > data.len() {
            return Err(Error::Shape(format!("factor size {size} exceeds data length {}", data.len())));
        }
        if (1..=size).any(|k| (data.b[k] - data.a[k].conj()).norm() > 1e-14 * (1.0 + data.a[k].norm())) {
            return Err(Error::InvalidData("Gram factor needs b_k = conj(a_k)".into()));
        }
        let nodes = m.nodes();
        if nodes.len() < size + 1 {
            return Err(Error::Shape(format!("{} support points for {} basis functions", nodes.len(), size + 1)));
        }
        let mut g = DMatrix::<Complex64>::zeros(nodes.len(), size + 1);
        for (s, (&t, &w)) in nodes.iter().zip(m.weights()).enumerate() {
            let mut f = c64(w.sqrt());
            g[(s, 0)] = f;
            for k in 1..=size {
                f /= c64(t) - data.a[k];
                g[(s, k)] = f;
            }
        }
        Ok(Self { r: g.qr().r() })
    }

    pub fn size(&self) -> usize {
        self.r.ncols() - 1
    }
}

/// Where the moments `c_{nm}` come from.
#[derive(Clone, Debug)]
pub enum Moments {
    /// Explicit table, with determinants by LU and cofactor expansion.
    Table(DMatrix<Complex64>),
    /// Gram factor of a discrete measure.
    Factor(GramFactor),
}

impl Moments {
    /// Largest `n` with `Delta_{n+1}` available.
    pub fn order(&self) -> usize {
        match self {
            Moments::Table(t) => t.nrows().min(t.ncols()) - 1,
            Moments::Factor(f) => f.size(),
        }
    }

    pub fn delta(&self, n: usize) -> Result<Complex64> {
        if n > self.order() + 1 {
            return Err(Error::Shape(format!("Delta_{n} out of range")));
        }
        match self {
            Moments::Table(t) => delta(t, n),
            Moments::Factor(f) => Ok(c64((0..n).map(|i| f.r[(i, i)].norm_sqr()).product())),
        }
    }

    /// `Delta_n / Delta_{n+1}`.
    pub fn delta_ratio(&self, n: usize) -> Result<Complex64> {
        if n > self.order() {
            return Err(Error::Shape(format!("Delta_{} out of range", n + 1)));
        }
        match self {
            Moments::Table(t) => {
                let d_next = delta(t, n + 1)?;
                if !(d_next.norm() > 0.0) {
                    return Err(Error::SingularDelta(n + 1));
                }
                Ok(delta(t, n)? / d_next)
            }
            Moments::Factor(f) => {
                let d = f.r[(n, n)].norm_sqr();
                if !(d > 0.0) {
                    return Err(Error::SingularDelta(n + 1));
                }
                Ok(c64(1.0 / d))
            }
        }
    }

    /// Cofactors of the bordered determinant along the border row, divided by `Delta_n`:
    /// `(u, v)` with `U_n = P_n(a_n) sum_k u_k / A_k` and `V_n = P_n(b_n) sum_k v_k / B_k`.
    fn bordered(&self, n: usize) -> Result<(Vec<Complex64>, Vec<Complex64>)> {
        match self {
            Moments::Table(t) => {
                let d = delta(t, n)?;
                if !(d.norm() > 0.0) {
                    return Err(Error::SingularDelta(n));
                }
                let mut mu = DMatrix::<Complex64>::zeros(n + 1, n + 1);
                let mut mv = DMatrix::<Complex64>::zeros(n + 1, n + 1);
                for i in 0..n {
                    for k in 0..=n {
                        mu[(i, k)] = t[(k, i)];
                        mv[(i, k)] = t[(i, k)];
                    }
                }
                let cof = |m: &DMatrix<Complex64>, k: usize| -> Result<Complex64> {
                    let minor = m.clone().remove_row(n).remove_column(k);
                    let sign = if (n + k) % 2 == 0 { ONE } else { -ONE };
                    Ok(sign * dense_det(&minor)? / d)
                };
                let u = (0..=n).map(|k| cof(&mu, k)).collect::<Result<_>>()?;
                let v = (0..=n).map(|k| cof(&mv, k)).collect::<Result<_>>()?;
                Ok((u, v))
            }
            Moments::Factor(f) => {
                // Rows i < n of the bordered matrix are R_n^H [R_n | r], r = R[0..n, n];
                // its cofactors over Delta_n are (-x, 1) with R_n x = r.
                let rn = f.r.view((0, 0), (n, n)).into_owned();
                let col = f.r.view((0, n), (n, 1)).into_owned();
                let x = rn
                    .solve_upper_triangular(&col)
                    .ok_or(Error::SingularDelta(n))?;
                let mut u: Vec<Complex64> = x.iter().map(|v| -v).collect();
                u.push(ONE);
                let v = u.iter().map(|c| c.conj()).collect();
                Ok((u, v))
            }
        }
    }
}

/// Coefficients of `U_n`, `V_n` over the bases `{1/A_k}`, `{1/B_k}` from the
/// bordered moment determinants.
#[derive(Clone, Debug)]
pub struct DeterminantForms {
    pub n: usize,
    pub u_coeffs: Vec<Complex64>,
    pub v_coeffs: Vec<Complex64>,
    /// `Delta_{n+1} / Delta_n`.
    pub delta_growth: Complex64,
    a: Vec<Complex64>,
    b: Vec<Complex64>,
}

impl DeterminantForms {
    pub fn eval_u(&self, z: Complex64) -> Complex64 {
        basis_sum(&self.u_coeffs, &self.a, z)
    }

    pub fn eval_v(&self, z: Complex64) -> Complex64 {
        basis_sum(&self.v_coeffs, &self.b, z)
    }

    /// `sigma{U_n V_n}` through the determinants: `(Delta_{n+1}/Delta_n) P_n(a_n) P_n(b_n)`.
    pub fn gram_diagonal(&self) -> Complex64 {
        self.delta_growth * self.u_coeffs[self.n] * self.v_coeffs[self.n]
    }
}

fn basis_sum(coeffs: &[Complex64], poles: &[Complex64], z: Complex64) -> Complex64 {
    let mut inv = ONE;
    let mut acc = coeffs[0];
    for (k, &c) in coeffs.iter().enumerate().skip(1) {
        inv /= z - poles[k];
        acc += c * inv;
    }
    acc
}

/// `U_n`, `V_n` from the bordered determinants, scaled by `P_n(a_n)/Delta_n` and `P_n(b_n)/Delta_n`.
pub fn determinant_forms(data: &R2Data, moments: &Moments, n: usize) -> Result<DeterminantForms> {
    if n > DETERMINANT_MAX_ORDER || n > data.len() || n > moments.order() {
        return Err(Error::Shape(format!("determinant order {n} out of range")));
    }
    let p = data.polynomials();
    let pa = p[n].eval(data.a[n]);
    let pb = p[n].eval(data.b[n]);
    let (u, v) = moments.bordered(n)?;
    Ok(DeterminantForms {
        n,
        u_coeffs: u.into_iter().map(|c| c * pa).collect(),
        v_coeffs: v.into_iter().map(|c| c * pb).collect(),
        delta_growth: ONE / moments.delta_ratio(n)?,
        a: data.a.clone(),
        b: data.b.clone(),
    })
}

/// Relative disagreement between determinant-built and recurrence-built `U_n`, `V_n` at the probes.
pub fn determinant_agreement(sys: &BiorthSystem, forms: &DeterminantForms, probes: &[Complex64]) -> f64 {
    let n = forms.n;
    probes
        .iter()
        .map(|&z| {
            let (u, ud) = (sys.u[n].eval(z), forms.eval_u(z));
            let (v, vd) = (sys.v[n].eval(z), forms.eval_v(z));
            ((u - ud).norm() / u.norm().max(f64::MIN_POSITIVE))
                .max((v - vd).norm() / v.norm().max(f64::MIN_POSITIVE))
        })
        .fold(0.0, f64::max)
}

/// Both sides of `P_n(a_n) P_n(b_n) = (Delta_n / Delta_{n+1}) kappa_n (1 - kappa_n / kappa_{n-1})`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct PpKapReport {
    pub n: usize,
    pub lhs: Complex64,
    pub rhs: Complex64,
    pub residual: f64,
}

pub fn check_pp_kap(sys: &BiorthSystem, moments: &Moments, n: usize) -> Result<PpKapReport> {
    if n == 0 || n > sys.len() {
        return Err(Error::Shape(format!("PP_kap index {n} out of range")));
    }
    let lhs = sys.p[n].eval(sys.data.a[n]) * sys.p[n].eval(sys.data.b[n]);
    let k = &sys.kappa;
    let rhs = moments.delta_ratio(n)? * k[n] * (ONE - k[n] / k[n - 1]);
    let residual = (lhs - rhs).norm() / lhs.norm().max(rhs.norm()).max(f64::MIN_POSITIVE);
    Ok(PpKapReport { n, lhs, rhs, residual })
}

/// One step of the first-order system for `S`, `T`.
#[derive(Clone, Debug)]
pub struct FirstOrderStep {
    pub n: usize,
    pub nu: [Complex64; 4],
    pub s_next: Polynomial,
    pub t_next: Polynomial,
    /// `max(|nu1 + nu2 - 1|, |nu3 + nu4 - 1|)`.
    pub monic_defect: f64,
    /// Largest coefficient difference against the stored `S_{n+1}`, `T_{n+1}`.
    pub coeff_error: f64,
    /// Largest coefficient difference of `zeta^{(1)}_n (S_{n+1} - (z - b_n) S_n)`,
    /// `zeta^{(2)}_n (T_{n+1} - (z - a_n) T_n)` against `P_n`; `None` at `n = 0`.
    pub p_recovery_error: Option<f64>,
}

pub fn first_order_system(sys: &BiorthSystem, n: usize) -> Result<FirstOrderStep> {
    let d = &sys.data;
    if n >= sys.len() {
        return Err(Error::Shape(format!("first-order step {n} needs S_{}", n + 1)));
    }
    let (an, bn) = (d.a[n], d.b[n]);
    if an == bn {
        return Err(Error::EqualPoles(n));
    }
    let xn = if n == 0 { sys.xi0_extended() } else { sys.xi[n] };
    let (rn, be) = (d.r[n], d.beta[n]);
    let (a1, b1, x1) = (d.a[n + 1], d.b[n + 1], sys.xi[n + 1]);
    let nu = [
        (xn * be - xn * x1 * a1 - rn * an) / (rn * (bn - an)),
        (xn * be - xn * x1 * a1 - rn * bn) / (rn * (an - bn)),
        (xn * be - xn * x1 * b1 - rn * an) / (rn * (bn - an)),
        (xn * be - xn * x1 * b1 - rn * bn) / (rn * (an - bn)),
    ];
    let zs = &Polynomial::linear(bn) * &sys.s[n];
    let zt = &Polynomial::linear(an) * &sys.t[n];
    let s_next = &zs.scale(nu[0]) + &zt.scale(nu[1]);
    let t_next = &zs.scale(nu[2]) + &zt.scale(nu[3]);
    let monic_defect = (nu[0] + nu[1] - ONE).norm().max((nu[2] + nu[3] - ONE).norm());
    let coeff_error = (&s_next - &sys.s[n + 1])
        .max_abs_coeff()
        .max((&t_next - &sys.t[n + 1]).max_abs_coeff());
    let p_recovery_error = if n == 0 {
        None
    } else {
        let al = d.alpha[n];
        let z1 = rn * (ONE - xn) / (rn * (bn - a1) - xn * (be + al * a1));
        let z2 = rn * (ONE - xn) / (rn * (an - b1) - xn * (be + al * b1));
        let ps = (&sys.s[n + 1] - &zs).scale(z1);
        let pt = (&sys.t[n + 1] - &zt).scale(z2);
        Some(
            (&ps - &sys.p[n])
                .max_abs_coeff()
                .max((&pt - &sys.p[n]).max_abs_coeff()),
        )
    };
    Ok(FirstOrderStep {
        n,
        nu,
        s_next,
        t_next,
        monic_defect,
        coeff_error,
        p_recovery_error,
    })
}

/// The `kappa` sequence for data with (possibly) coinciding `kappa_0`, `kappa_1`.
#[derive(Clone, Debug, Serialize)]
pub struct KappaDegeneration {
    pub kappa: Vec<Complex64>,
    /// `max_n |kappa_n - kappa_0| / |kappa_0|`.
    pub max_rel_deviation: f64,
    pub constant: bool,
    /// Whether `build_system` rejected the data as degenerate.
    pub refused: bool,
}

pub fn kappa_degeneration_check(data: &R2Data) -> KappaDegeneration {
    let kappa = data.kappa_sequence();
    let k0 = kappa[0];
    let max_rel_deviation = kappa
        .iter()
        .map(|k| (k - k0).norm() / k0.norm().max(f64::MIN_POSITIVE))
        .fold(0.0, f64::max);
    let refused = matches!(build_system(data.clone()), Err(Error::KappaDegenerate));
    KappaDegeneration {
        kappa,
        max_rel_deviation,
        constant: max_rel_deviation <= 1e-10,
        refused,
    }
}

/// Largest relative residual of the recurrences for `R^{(1)}` and `R^{(2)}` at step `n`.
pub fn check_r_recurrences(sys: &BiorthSystem, n: usize, probes: &[Complex64]) -> Result<f64> {
    if n + 1 > sys.len() {
        return Err(Error::Shape(format!("recurrence step {n} needs P_{}", n + 1)));
    }
    let d = &sys.data;
    let mut worst: f64 = 0.0;
    for &z in probes {
        let lin = d.alpha[n] * z + d.beta[n];
        let terms1 = [
            (z - d.a[n + 1]) * sys.r1(n + 1, z),
            lin * sys.r1(n, z),
            if n == 0 { ZERO } else { d.r[n] * (z - d.b[n]) * sys.r1(n - 1, z) },
        ];
        let terms2 = [
            (z - d.b[n + 1]) * sys.r2(n + 1, z),
            lin * sys.r2(n, z),
            if n == 0 { ZERO } else { d.r[n] * (z - d.a[n]) * sys.r2(n - 1, z) },
        ];
        for terms in [terms1, terms2] {
            let sum: Complex64 = terms.iter().sum();
            let scale: f64 = terms.iter().map(|t| t.norm()).sum();
            worst = worst.max(sum.norm() / scale.max(f64::MIN_POSITIVE));
        }
    }
    Ok(worst)
}

/// Moment table `sigma{1/(A_i B_j)}` for `i, j <= size` with the system's poles `a_1..`, `b_1..`.
pub fn moment_table(m: &Measure, data: &R2Data, size: usize) -> Result<DMatrix<Complex64>> {
    if size > data.len() {
        return Err(Error::Shape(format!("table size {size} exceeds data length {}", data.len())));
    }
    m.moments_table(&data.a[1..], &data.b[1..], size)
}
