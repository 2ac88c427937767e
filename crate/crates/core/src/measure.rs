//! Finite positive measures on a compact interval, their Markov functions,
//! integrals of rational functions, rational moments and divided differences.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::RationalFunction;
use crate::quadrature;

/// Distance below which an evaluation point counts as lying on the interval.
pub const SUPPORT_TOL: f64 = 1e-13;
/// Minimal distance between a pole and the interval for integration.
pub const POLE_TOL: f64 = 1e-10;
pub const DEFAULT_QUAD_ORDER: usize = 200;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 2]", into = "[f64; 2]")]
pub struct Interval {
    pub alpha: f64,
    pub beta: f64,
}

impl Interval {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha < beta) || !alpha.is_finite() || !beta.is_finite() {
            return Err(Error::InvalidMeasure(format!(
                "interval [{alpha}, {beta}] must satisfy alpha < beta"
            )));
        }
        Ok(Self { alpha, beta })
    }

    pub fn contains(&self, t: f64) -> bool {
        self.alpha <= t && t <= self.beta
    }

    /// Euclidean distance from `z` to the segment.
    pub fn dist(&self, z: Complex64) -> f64 {
        let x = z.re.clamp(self.alpha, self.beta);
        (z - Complex64::new(x, 0.0)).norm()
    }

    fn to_interval(&self, x: f64) -> f64 {
        0.5 * (self.alpha + self.beta) + 0.5 * (self.beta - self.alpha) * x
    }
}

impl TryFrom<[f64; 2]> for Interval {
    type Error = Error;
    fn try_from(v: [f64; 2]) -> Result<Self> {
        Interval::new(v[0], v[1])
    }
}

impl From<Interval> for [f64; 2] {
    fn from(i: Interval) -> Self {
        [i.alpha, i.beta]
    }
}

/// Named weight functions, defined on `[-1, 1]` and carried affinely onto the interval.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Weight {
    Uniform,
    /// `(1/pi)(1 - x^2)^{-1/2}`
    Chebyshev1,
    /// `(1 - x)^a (1 + x)^b`, normalized to unit mass.
    Jacobi { a: f64, b: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub enum MeasureKind {
    Discrete,
    Weight {
        weight: Weight,
        quad_order: usize,
        /// Total mass; the named weights are probability densities scaled by this.
        scale: f64,
    },
}

/// A finite positive measure `d sigma` on `[alpha, beta]`, held as a node/weight list
/// (the atoms themselves for discrete measures, a Gauss rule for weights).
#[derive(Clone, Debug, PartialEq)]
pub struct Measure {
    interval: Interval,
    kind: MeasureKind,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    mass: f64,
}

impl Measure {
    pub fn discrete(interval: Interval, points: Vec<f64>, masses: Vec<f64>) -> Result<Self> {
        if points.is_empty() || points.len() != masses.len() {
            return Err(Error::InvalidMeasure(format!(
                "{} points but {} masses",
                points.len(),
                masses.len()
            )));
        }
        if let Some(t) = points.iter().find(|t| !interval.contains(**t)) {
            return Err(Error::InvalidMeasure(format!("point {t} outside the interval")));
        }
        if let Some(w) = masses.iter().find(|w| !(**w > 0.0) || !w.is_finite()) {
            return Err(Error::InvalidMeasure(format!("mass {w} is not positive")));
        }
        let mass = masses.iter().sum();
        Ok(Self {
            interval,
            kind: MeasureKind::Discrete,
            nodes: points,
            weights: masses,
            mass,
        })
    }

    pub fn weighted(interval: Interval, weight: Weight, quad_order: usize) -> Result<Self> {
        Self::weighted_with_mass(interval, weight, quad_order, 1.0)
    }

    pub fn weighted_with_mass(
        interval: Interval,
        weight: Weight,
        quad_order: usize,
        scale: f64,
    ) -> Result<Self> {
        if quad_order == 0 {
            return Err(Error::InvalidMeasure("quad_order must be positive".into()));
        }
        if !(scale > 0.0) || !scale.is_finite() {
            return Err(Error::InvalidMeasure(format!("mass {scale} is not positive")));
        }
        let (x, w) = match weight {
            Weight::Uniform => quadrature::gauss_jacobi(quad_order, 0.0, 0.0),
            Weight::Chebyshev1 => quadrature::gauss_chebyshev1(quad_order),
            Weight::Jacobi { a, b } => {
                if !(a > -1.0 && b > -1.0) {
                    return Err(Error::InvalidMeasure(format!(
                        "Jacobi exponents ({a}, {b}) must exceed -1"
                    )));
                }
                quadrature::gauss_jacobi(quad_order, a, b)
            }
        };
        let nodes = x.iter().map(|&x| interval.to_interval(x)).collect();
        let weights = w.iter().map(|w| w * scale).collect();
        Ok(Self {
            interval,
            kind: MeasureKind::Weight {
                weight,
                quad_order,
                scale,
            },
            nodes,
            weights,
            mass: scale,
        })
    }

    /// Chebyshev (first kind) probability measure on `[-1, 1]` with the default order.
    pub fn chebyshev() -> Self {
        Self::weighted(
            Interval { alpha: -1.0, beta: 1.0 },
            Weight::Chebyshev1,
            DEFAULT_QUAD_ORDER,
        )
        .expect("valid default measure")
    }

    pub fn interval(&self) -> Interval {
        self.interval
    }

    pub fn kind(&self) -> &MeasureKind {
        &self.kind
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    /// Atoms (discrete) or quadrature nodes (weights).
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Number of support points when the measure is discrete.
    pub fn support_size(&self) -> Option<usize> {
        matches!(self.kind, MeasureKind::Discrete).then_some(self.nodes.len())
    }

    pub fn normalize(&self) -> Self {
        let mut out = self.clone();
        for w in &mut out.weights {
            *w /= self.mass;
        }
        out.mass = 1.0;
        if let MeasureKind::Weight { scale, .. } = &mut out.kind {
            *scale = 1.0;
        }
        out
    }

    pub fn is_normalized(&self) -> bool {
        (self.mass - 1.0).abs() <= 1e-14
    }

    /// `int f(t) d sigma(t)` for a smooth integrand.
    pub fn integrate<F: Fn(f64) -> Complex64>(&self, f: F) -> Complex64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&t, &w)| f(t) * w)
            .sum()
    }

    pub fn integrate_real<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&t, &w)| f(t) * w).sum()
    }

    /// The Markov function `phi(lambda) = int d sigma(t) / (t - lambda)`.
    pub fn eval_markov(&self, lambda: Complex64) -> Result<Complex64> {
        if self.interval.dist(lambda) < SUPPORT_TOL {
            return Err(Error::PointOnSupport(lambda));
        }
        Ok(self.integrate(|t| 1.0 / (t - lambda)))
    }

    pub fn integrate_rational(&self, f: &RationalFunction) -> Result<Complex64> {
        for p in f.pole_set()? {
            if self.interval.dist(p) < POLE_TOL {
                return Err(Error::PoleOnSupport(p));
            }
        }
        Ok(self.integrate(|t| f.eval(Complex64::new(t, 0.0))))
    }

    /// Rational moments `c[n][m] = int d sigma / (A_n(t) B_m(t))` with
    /// `A_n = prod_{k<n} (t - a[k])`, `B_m = prod_{k<m} (t - b[k])`, for `n, m <= size`.
    pub fn moments_table(
        &self,
        a: &[Complex64],
        b: &[Complex64],
        size: usize,
    ) -> Result<DMatrix<Complex64>> {
        if a.len() < size || b.len() < size {
            return Err(Error::Shape(format!("need {size} poles per side")));
        }
        for &p in a[..size].iter().chain(&b[..size]) {
            if self.interval.dist(p) < POLE_TOL {
                return Err(Error::PoleOnSupport(p));
            }
        }
        let mut c = DMatrix::<Complex64>::zeros(size + 1, size + 1);
        let mut inv_a = vec![Complex64::new(0.0, 0.0); size + 1];
        let mut inv_b = inv_a.clone();
        for (&t, &w) in self.nodes.iter().zip(&self.weights) {
            inv_a[0] = Complex64::new(1.0, 0.0);
            inv_b[0] = Complex64::new(1.0, 0.0);
            for k in 0..size {
                inv_a[k + 1] = inv_a[k] / (t - a[k]);
                inv_b[k + 1] = inv_b[k] / (t - b[k]);
            }
            for n in 0..=size {
                for m in 0..=size {
                    c[(n, m)] += inv_a[n] * inv_b[m] * w;
                }
            }
        }
        Ok(c)
    }

    /// Moments with the pole pattern of the interpolation chain:
    /// `a_k = z_{k-1}`, `b_k = conj(z_{k-1})`.
    pub fn moments_cnm(&self, nodes: &NodeSequence, size: usize) -> Result<DMatrix<Complex64>> {
        if nodes.len() < size {
            return Err(Error::InvalidNodes(format!(
                "{size} nodes needed, {} available",
                nodes.len()
            )));
        }
        let a: Vec<_> = nodes.as_slice()[..size].to_vec();
        let b: Vec<_> = a.iter().map(|z| z.conj()).collect();
        self.moments_table(&a, &b, size)
    }
}

pub fn eval_markov(m: &Measure, lambda: Complex64) -> Result<Complex64> {
    m.eval_markov(lambda)
}

pub fn integrate_rational(m: &Measure, f: &RationalFunction) -> Result<Complex64> {
    m.integrate_rational(f)
}

pub fn normalize(m: &Measure) -> Measure {
    m.normalize()
}

pub fn moments_cnm(m: &Measure, nodes: &NodeSequence, n: usize) -> Result<DMatrix<Complex64>> {
    m.moments_cnm(nodes, n)
}

/// Order-`k` divided difference `[x_0 .. x_k] f` from samples at distinct points,
/// computed with the Newton table.
pub fn divided_difference(points: &[Complex64], values: &[Complex64]) -> Result<Complex64> {
    if points.len() != values.len() || points.is_empty() {
        return Err(Error::Shape(format!(
            "{} points, {} values",
            points.len(),
            values.len()
        )));
    }
    for (i, x) in points.iter().enumerate() {
        if points[i + 1..].iter().any(|y| x == y) {
            return Err(Error::DuplicatePoints);
        }
    }
    let mut table = values.to_vec();
    let n = points.len();
    for order in 1..n {
        for i in 0..n - order {
            table[i] = (table[i + 1] - table[i]) / (points[i + order] - points[i]);
        }
    }
    Ok(table[0])
}

/// Divided difference through the explicit sum `sum_s f_s / prod_{k != s} (x_s - x_k)`,
/// returned with the sum of absolute term sizes (the natural scale for residuals).
pub fn divided_difference_with_scale(
    points: &[Complex64],
    values: &[Complex64],
) -> Result<(Complex64, f64)> {
    let value = divided_difference(points, values)?;
    let scale = points
        .iter()
        .zip(values)
        .enumerate()
        .map(|(s, (&x, &f))| {
            let d: Complex64 = points
                .iter()
                .enumerate()
                .filter(|(k, _)| *k != s)
                .map(|(_, &y)| x - y)
                .product();
            (f / d).norm()
        })
        .sum();
    Ok((value, scale))
}

/// Interpolation nodes in the open upper half plane.
#[derive(Clone, Debug, PartialEq)]
pub struct NodeSequence {
    nodes: Vec<Complex64>,
    delta: f64,
}

impl NodeSequence {
    pub fn new(nodes: Vec<Complex64>, delta: f64) -> Result<Self> {
        if !(delta > 0.0) {
            return Err(Error::InvalidNodes(format!("delta = {delta} must be positive")));
        }
        if let Some(z) = nodes.iter().find(|z| !(z.im >= delta) || !z.re.is_finite()) {
            return Err(Error::InvalidNodes(format!(
                "node {z} has imaginary part below delta = {delta}"
            )));
        }
        for (i, x) in nodes.iter().enumerate() {
            if nodes[i + 1..].iter().any(|y| x == y) {
                return Err(Error::InvalidNodes(format!("node {x} repeated")));
            }
        }
        Ok(Self { nodes, delta })
    }

    /// Largest admissible `delta`: the smallest imaginary part.
    pub fn from_nodes(nodes: Vec<Complex64>) -> Result<Self> {
        let delta = nodes.iter().map(|z| z.im).fold(f64::INFINITY, f64::min);
        Self::new(nodes, if delta.is_finite() { delta } else { 1.0 })
    }

    /// `z_k = re + base (1 + k spacing) i`.
    pub fn vertical(base: f64, spacing: f64, re: f64, count: usize, delta: f64) -> Result<Self> {
        let nodes = (0..count)
            .map(|k| Complex64::new(re, base * (1.0 + k as f64 * spacing)))
            .collect();
        Self::new(nodes, delta)
    }

    /// `count` nodes on the upper half circle of the given radius around `center`,
    /// lifted by `delta`: `z_k = center + radius e^{i theta_k} + delta i`,
    /// `theta_k = pi (k + 1) / (count + 1)`.
    pub fn arc(center: f64, radius: f64, count: usize, delta: f64) -> Result<Self> {
        let nodes = (0..count)
            .map(|k| {
                let theta = PI * (k + 1) as f64 / (count + 1) as f64;
                Complex64::new(center + radius * theta.cos(), delta + radius * theta.sin())
            })
            .collect();
        Self::new(nodes, delta)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn get(&self, k: usize) -> Option<Complex64> {
        self.nodes.get(k).copied()
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.nodes
    }
}

/// JSON form of a measure.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum MeasureSpec {
    Discrete {
        interval: Interval,
        points: Vec<f64>,
        masses: Vec<f64>,
    },
    Weight {
        interval: Interval,
        name: WeightName,
        #[serde(default)]
        params: WeightParams,
        #[serde(default = "default_quad_order")]
        quad_order: usize,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightName {
    Uniform,
    Chebyshev1,
    Jacobi,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightParams {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mass: Option<f64>,
}

fn default_quad_order() -> usize {
    DEFAULT_QUAD_ORDER
}

impl MeasureSpec {
    pub fn build(&self) -> Result<Measure> {
        match self {
            MeasureSpec::Discrete {
                interval,
                points,
                masses,
            } => Measure::discrete(*interval, points.clone(), masses.clone()),
            MeasureSpec::Weight {
                interval,
                name,
                params,
                quad_order,
            } => {
                let weight = match name {
                    WeightName::Uniform => Weight::Uniform,
                    WeightName::Chebyshev1 => Weight::Chebyshev1,
                    WeightName::Jacobi => Weight::Jacobi {
                        a: params.a.ok_or_else(|| {
                            Error::InvalidMeasure("jacobi weight needs params.a".into())
                        })?,
                        b: params.b.ok_or_else(|| {
                            Error::InvalidMeasure("jacobi weight needs params.b".into())
                        })?,
                    },
                };
                Measure::weighted_with_mass(
                    *interval,
                    weight,
                    *quad_order,
                    params.mass.unwrap_or(1.0),
                )
            }
        }
    }
}

impl From<&Measure> for MeasureSpec {
    fn from(m: &Measure) -> Self {
        match m.kind() {
            MeasureKind::Discrete => MeasureSpec::Discrete {
                interval: m.interval(),
                points: m.nodes().to_vec(),
                masses: m.weights().to_vec(),
            },
            MeasureKind::Weight {
                weight,
                quad_order,
                scale,
            } => {
                let (name, a, b) = match *weight {
                    Weight::Uniform => (WeightName::Uniform, None, None),
                    Weight::Chebyshev1 => (WeightName::Chebyshev1, None, None),
                    Weight::Jacobi { a, b } => (WeightName::Jacobi, Some(a), Some(b)),
                };
                MeasureSpec::Weight {
                    interval: m.interval(),
                    name,
                    params: WeightParams {
                        a,
                        b,
                        mass: (*scale != 1.0).then_some(*scale),
                    },
                    quad_order: *quad_order,
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{c64, Polynomial};

    fn sym() -> Interval {
        Interval::new(-1.0, 1.0).unwrap()
    }

    fn two_point() -> Measure {
        Measure::discrete(sym(), vec![-1.0, 1.0], vec![0.5, 0.5]).unwrap()
    }

    #[test]
    fn markov_single_mass() {
        let m = Measure::discrete(sym(), vec![0.0], vec![1.0]).unwrap();
        let v = m.eval_markov(c64(0.0, 2.0)).unwrap();
        assert!((v - c64(0.0, 0.5)).norm() < 1e-15);
    }

    #[test]
    fn markov_two_point_closed_form() {
        let m = two_point();
        for l in [c64(0.0, 1.0), c64(0.3, 0.7), c64(2.0, -1.0)] {
            let want = l / (1.0 - l * l);
            assert!((m.eval_markov(l).unwrap() - want).norm() < 1e-15);
        }
        assert!((m.eval_markov(c64(0.0, 1.0)).unwrap() - c64(0.0, 0.5)).norm() < 1e-15);
    }

    #[test]
    fn markov_chebyshev_closed_form() {
        let m = Measure::chebyshev();
        let v = m.eval_markov(c64(2.0, 0.0)).unwrap();
        let want = -1.0 / 3f64.sqrt();
        assert!((v.re - want).abs() <= 1e-10 * want.abs() && v.im.abs() < 1e-15);
    }

    #[test]
    fn markov_rejects_support() {
        assert!(matches!(
            two_point().eval_markov(c64(0.5, 0.0)),
            Err(Error::PointOnSupport(_))
        ));
        assert!(two_point().eval_markov(c64(1.5, 0.0)).is_ok());
    }

    #[test]
    fn integrate_rational_examples() {
        let m = Measure::chebyshev();
        let one = RationalFunction::polynomial(Polynomial::one());
        assert!((m.integrate_rational(&one).unwrap() - 1.0).norm() < 1e-14);

        let point = Measure::discrete(sym(), vec![0.0], vec![1.0]).unwrap();
        let f = RationalFunction::with_poles(Polynomial::one(), vec![c64(0.0, 2.0)]);
        assert!((point.integrate_rational(&f).unwrap() - c64(0.0, 0.5)).norm() < 1e-15);

        let t2 = RationalFunction::polynomial(Polynomial::from_real(&[0.0, 0.0, 1.0]));
        assert!((m.integrate_rational(&t2).unwrap() - 0.5).norm() < 1e-14);

        let bad = RationalFunction::with_poles(Polynomial::one(), vec![c64(0.2, 0.0)]);
        assert!(matches!(m.integrate_rational(&bad), Err(Error::PoleOnSupport(_))));
    }

    #[test]
    fn moments_examples() {
        let m = Measure::discrete(sym(), vec![0.0], vec![1.0]).unwrap();
        let nodes = NodeSequence::new(vec![c64(0.0, 1.0)], 0.5).unwrap();
        let c = m.moments_cnm(&nodes, 1).unwrap();
        assert!((c[(0, 0)] - 1.0).norm() < 1e-15);
        assert!((c[(1, 0)] - c64(0.0, 1.0)).norm() < 1e-15);
        assert!((c[(1, 1)] - 1.0).norm() < 1e-15);
    }

    #[test]
    fn divided_difference_examples() {
        let z0 = c64(0.3, 0.2);
        assert_eq!(divided_difference(&[z0], &[c64(5.0, 1.0)]).unwrap(), c64(5.0, 1.0));

        let pts: Vec<_> = (0..4).map(|k| c64(k as f64, 0.0)).collect();
        let sq: Vec<_> = pts.iter().map(|x| x * x).collect();
        assert!((divided_difference(&pts[..3], &sq[..3]).unwrap() - 1.0).norm() < 1e-14);
        let cube: Vec<_> = pts.iter().map(|x| x * x * x).collect();
        assert!((divided_difference(&pts, &cube).unwrap() - 1.0).norm() < 1e-14);
        assert!((divided_difference(&pts[..3], &cube[..3]).unwrap() - 3.0).norm() < 1e-14);

        assert_eq!(
            divided_difference(&[z0, z0], &[c64(1.0, 0.0), c64(2.0, 0.0)]),
            Err(Error::DuplicatePoints)
        );
    }

    #[test]
    fn normalize_examples() {
        let m = Measure::discrete(sym(), vec![0.0], vec![2.0]).unwrap().normalize();
        assert_eq!(m.weights(), &[1.0]);
        let n = m.normalize();
        assert_eq!(m, n);
        let m = Measure::discrete(sym(), vec![-1.0, 1.0], vec![1.0, 1.0]).unwrap().normalize();
        assert_eq!(m.weights(), &[0.5, 0.5]);
    }

    #[test]
    fn invalid_measures() {
        assert!(Interval::new(1.0, 1.0).is_err());
        assert!(Measure::discrete(sym(), vec![2.0], vec![1.0]).is_err());
        assert!(Measure::discrete(sym(), vec![0.0], vec![0.0]).is_err());
        assert!(Measure::discrete(sym(), vec![0.0, 0.5], vec![1.0]).is_err());
    }

    #[test]
    fn node_generators() {
        let v = NodeSequence::vertical(1.0, 0.25, 0.0, 3, 0.5).unwrap();
        assert_eq!(v.as_slice()[2], c64(0.0, 1.5));
        let a = NodeSequence::arc(0.0, 2.0, 5, 0.3).unwrap();
        assert!(a.as_slice().iter().all(|z| z.im >= 0.3));
        assert!(NodeSequence::new(vec![c64(0.0, 0.1)], 0.5).is_err());
        assert!(NodeSequence::new(vec![c64(0.0, 1.0), c64(0.0, 1.0)], 0.5).is_err());
    }

    #[test]
    fn spec_round_trip() {
        let json = r#"{"interval":[-1,1],"type":"weight","name":"jacobi","params":{"a":0.5,"b":-0.5},"quad_order":64}"#;
        let spec: MeasureSpec = serde_json::from_str(json).unwrap();
        let m = spec.build().unwrap();
        assert_eq!(MeasureSpec::from(&m), spec);
        let json = r#"{"interval":[-1,1],"type":"discrete","points":[-1,1],"masses":[0.5,0.5]}"#;
        let spec: MeasureSpec = serde_json::from_str(json).unwrap();
        assert_eq!(spec.build().unwrap(), two_point());
    }
}
