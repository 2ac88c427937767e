//! Step-by-step Nevanlinna–Pick reduction for Markov functions.
//!
//! Each step peels one interpolation node off the current tail function
//!
//! ```text
//! phi_j(l) = -1 / (a2_j l - a1_j + b_j^2 (l - z_j)(l - conj z_j) phi_{j+1}(l))
//! ```
//!
//! with `a1_j, a2_j` real and `b_j > 0`. Under the probability normalization every
//! tail is again a probability Markov function, which forces `a2_j = 1 + b_j^2`.

use nalgebra::{DMatrix, Matrix2};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::measure::{Interval, Measure, NodeSequence, SUPPORT_TOL};
use crate::numerics::dense::{hermitian_part, sym_eigs, DenseMatrix};

/// Default cutoff on `b^2` below which the chain is declared terminated.
pub const DEFAULT_DEGENERATE_TOL: f64 = 1e-12;
/// Allowed imaginary residue of `a2 z + 1/w` before taking the real part.
pub const REALNESS_TOL: f64 = 1e-10;
/// `b^2` below `-NEGATIVE_B2_TOL` signals invalid (non-Markov) input.
pub const NEGATIVE_B2_TOL: f64 = 1e-9;

/// Coefficients of one reduction step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SchurStep {
    pub z: Complex64,
    pub a1: f64,
    pub a2: f64,
    /// Zero only for the terminal record of a finished chain.
    pub b: f64,
    /// The tail value `phi_j(z_j)` the coefficients were computed from.
    pub phi_at_z: Complex64,
}

impl SchurStep {
    /// `a2 l - a1`.
    pub fn linear(&self, lambda: Complex64) -> Complex64 {
        self.a2 * lambda - self.a1
    }

    /// `b^2 (l - z)(l - conj z)`.
    pub fn quadratic(&self, lambda: Complex64) -> Complex64 {
        self.b * self.b * (lambda - self.z) * (lambda - self.z.conj())
    }
}

/// Coefficient field selector, used for fault injection in checks.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StepField {
    A1,
    A2,
    B,
}

#[derive(Clone, Debug)]
pub struct SchurChain {
    measure: Measure,
    nodes: NodeSequence,
    /// `tails[j]` represents `phi_j`.
    tails: Vec<TailMeasure>,
    steps: Vec<SchurStep>,
    terminal: Option<SchurStep>,
    degenerate_tol: f64,
}

impl SchurChain {
    /// Empty chain for `phi_0 = phi`; the measure is normalized to unit mass.
    pub fn new(measure: &Measure, nodes: NodeSequence) -> Self {
        let measure = measure.normalize();
        let tail = TailMeasure::new(measure.nodes().to_vec(), measure.weights().to_vec());
        Self {
            measure,
            nodes,
            tails: vec![tail],
            steps: Vec::new(),
            terminal: None,
            degenerate_tol: DEFAULT_DEGENERATE_TOL,
        }
    }

    pub fn with_degenerate_tol(mut self, tol: f64) -> Self {
        self.degenerate_tol = tol;
        self
    }

    pub fn measure(&self) -> &Measure {
        &self.measure
    }

    pub fn interval(&self) -> Interval {
        self.measure.interval()
    }

    pub fn nodes(&self) -> &NodeSequence {
        &self.nodes
    }

    /// Nondegenerate steps (all with `b > 0`).
    pub fn steps(&self) -> &[SchurStep] {
        &self.steps
    }

    pub fn terminal(&self) -> Option<&SchurStep> {
        self.terminal.as_ref()
    }

    pub fn is_terminated(&self) -> bool {
        self.terminal.is_some()
    }

    /// Number of coefficient records: nondegenerate steps plus the terminal record.
    pub fn len(&self) -> usize {
        self.steps.len() + usize::from(self.terminal.is_some())
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Coefficient record `j`: step `j`, or the terminal record right after the last step.
    pub fn record(&self, j: usize) -> Option<&SchurStep> {
        self.steps
            .get(j)
            .or_else(|| (j == self.steps.len()).then_some(self.terminal.as_ref()).flatten())
    }

    pub fn records(&self) -> impl Iterator<Item = &SchurStep> {
        self.steps.iter().chain(self.terminal.as_ref())
    }

    fn check_point(&self, j: usize, lambda: Complex64) -> Result<()> {
        if j > self.steps.len() {
            return Err(Error::ChainTooShort {
                needed: j,
                available: self.steps.len(),
            });
        }
        if self.interval().dist(lambda) < SUPPORT_TOL {
            return Err(Error::PointOnSupport(lambda));
        }
        for s in &self.steps[..j] {
            let tol = 1e-14 * (1.0 + s.z.norm());
            if (lambda - s.z).norm() <= tol || (lambda - s.z.conj()).norm() <= tol {
                return Err(Error::NodeCollision(lambda));
            }
        }
        Ok(())
    }

    /// Tail function `phi_j(lambda)`, the Markov function of the `j`-th tail measure.
    pub fn phi(&self, j: usize, lambda: Complex64) -> Result<Complex64> {
        self.check_point(j, lambda)?;
        Ok(self.tails[j].markov(lambda))
    }

    /// Discrete probability measure representing `phi_j`.
    pub fn tail_measure(&self, j: usize) -> Option<&TailMeasure> {
        self.tails.get(j)
    }

    /// Direct tail iteration `phi_{k+1} = -(1/phi_k + a2 l - a1) / (b^2 (l - z)(l - conj z))`.
    pub fn phi_forward(&self, j: usize, lambda: Complex64) -> Result<Complex64> {
        self.check_point(j, lambda)?;
        let mut v = self.measure.eval_markov(lambda)?;
        for s in &self.steps[..j] {
            if v.norm() == 0.0 {
                return Err(Error::ZeroDenominator(lambda));
            }
            v = -(1.0 / v + s.linear(lambda)) / s.quadratic(lambda);
        }
        Ok(v)
    }

    /// One reduction step at the next node. On degeneration the terminal record is
    /// stored and [`Error::DegenerateStep`] is returned.
    ///
    /// With `1/phi_j = -(l - m) - v phi_rho` (`rho` the associated measure of the tail)
    /// the coefficients are `b^2 = v Im phi_rho(z) / Im z`, `a2 = 1 + b^2` and
    /// `a1 = m + b^2 Re z - v Re phi_rho(z)`. These agree with the direct formulas
    /// `a2 = -Im(1/w) / Im z`, `a1 = a2 z + 1/w` but avoid the cancellation in `a2 - 1`.
    pub fn step(&mut self) -> Result<&SchurStep> {
        if self.terminal.is_some() {
            return Err(Error::ChainTerminated);
        }
        let index = self.steps.len();
        let z = self.nodes.get(index).ok_or(Error::NoMoreNodes(index))?;
        let tail = &self.tails[index];
        let w = tail.markov(z);
        if w.norm() == 0.0 {
            return Err(Error::ZeroDenominator(z));
        }
        let inv = 1.0 / w;
        let a2_direct = -inv.im / z.im;
        let a1_direct = a2_direct * z + inv;
        let scale = 1.0 + inv.norm() + a2_direct.abs() * z.norm();
        if a1_direct.im.abs() > REALNESS_TOL * scale {
            return Err(Error::NonRealCoefficient {
                index,
                residue: a1_direct.im.abs() / scale,
            });
        }
        let assoc = tail.associated();
        let (a1, b2) = match &assoc {
            Some((m, v, rho)) => {
                let f = rho.markov(z);
                let b2 = v * f.im / z.im;
                (m + b2 * z.re - v * f.re, b2)
            }
            None => (a1_direct.re, a2_direct - 1.0),
        };
        let a2 = 1.0 + b2;
        if b2 < -NEGATIVE_B2_TOL {
            return Err(Error::NonpositiveB { index, b2 });
        }
        let next = match assoc {
            Some((_, _, rho)) if b2 > self.degenerate_tol => rho.reweighted(z),
            _ => {
                self.terminal = Some(SchurStep {
                    z,
                    a1,
                    a2,
                    b: 0.0,
                    phi_at_z: w,
                });
                return Err(Error::DegenerateStep { index, a1, a2, b2 });
            }
        };
        self.tails.push(next);
        self.steps.push(SchurStep {
            z,
            a1,
            a2,
            b: b2.sqrt(),
            phi_at_z: w,
        });
        Ok(self.steps.last().expect("just pushed"))
    }

    /// Run up to `n_steps` steps, stopping early (without error) when the chain terminates.
    pub fn run(&mut self, n_steps: usize) -> Result<()> {
        while self.len() < n_steps {
            match self.step() {
                Ok(_) => {}
                Err(Error::DegenerateStep { .. }) => break,
                Err(e) => return Err(e),
            }
        }
        Ok(())
    }

    /// Copy with one coefficient shifted by `delta`.
    pub fn perturbed(&self, index: usize, field: StepField, delta: f64) -> Result<Self> {
        let mut out = self.clone();
        let n = out.steps.len();
        let rec = if index < n {
            &mut out.steps[index]
        } else if index == n && out.terminal.is_some() {
            out.terminal.as_mut().expect("checked")
        } else {
            return Err(Error::ChainTooShort {
                needed: index + 1,
                available: self.len(),
            });
        };
        match field {
            StepField::A1 => rec.a1 += delta,
            StepField::A2 => rec.a2 += delta,
            StepField::B => rec.b += delta,
        }
        Ok(out)
    }
}

/// Finite probability measure `sum_i w_i delta_{t_i}`.
#[derive(Clone, Debug, PartialEq)]
pub struct TailMeasure {
    atoms: Vec<f64>,
    weights: Vec<f64>,
}

/// Weights below this fraction of the total are dropped from tail measures.
const TAIL_WEIGHT_FLOOR: f64 = 1e-28;

impl TailMeasure {
    /// Normalizes the weights and drops negligible atoms.
    pub fn new(atoms: Vec<f64>, weights: Vec<f64>) -> Self {
        let total: f64 = weights.iter().sum();
        let (atoms, weights) = atoms
            .into_iter()
            .zip(weights)
            .filter(|&(_, w)| w > TAIL_WEIGHT_FLOOR * total)
            .map(|(t, w)| (t, w / total))
            .unzip();
        Self { atoms, weights }
    }

    pub fn atoms(&self) -> &[f64] {
        &self.atoms
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn markov(&self, lambda: Complex64) -> Complex64 {
        self.atoms
            .iter()
            .zip(&self.weights)
            .map(|(&t, &w)| w / (t - lambda))
            .sum()
    }

    /// Mean `m`, variance `v` and associated measure `rho` with
    /// `-1/phi(l) = l - m + v phi_rho(l)`; `None` for a point mass.
    ///
    /// `rho` is the spectral measure of `diag(t)` compressed to the orthogonal complement
    /// of `sqrt(w)`, taken at the normalized vector `(t - m) sqrt(w)`.
    pub fn associated(&self) -> Option<(f64, f64, TailMeasure)> {
        let n = self.atoms.len();
        let mean: f64 = self.atoms.iter().zip(&self.weights).map(|(t, w)| t * w).sum();
        let u: Vec<f64> = self.weights.iter().map(|w| w.sqrt()).collect();
        let g: Vec<f64> = self.atoms.iter().zip(&u).map(|(t, u)| (t - mean) * u).collect();
        let var: f64 = g.iter().map(|x| x * x).sum();
        let spread = self.atoms.iter().map(|t| (t - mean).abs()).fold(0.0, f64::max);
        if n < 2 || var <= (1e-15 * spread).powi(2) {
            return None;
        }
        // Householder reflector H with H u = -sign(u_0) e_0
        let mut h = u.clone();
        h[0] = u[0] + if u[0] >= 0.0 { 1.0 } else { -1.0 };
        let hh: f64 = h.iter().map(|x| x * x).sum();
        let beta = 2.0 / hh;
        let dh: Vec<f64> = self.atoms.iter().zip(&h).map(|(t, h)| t * h).collect();
        let hdh: f64 = h.iter().zip(&dh).map(|(a, b)| a * b).sum();
        // H D H = D - beta (h dh^T + dh h^T) + beta^2 (h^T D h) h h^T, trailing block
        let c = DMatrix::from_fn(n - 1, n - 1, |a, b| {
            let (i, j) = (a + 1, b + 1);
            let d = if i == j { self.atoms[i] } else { 0.0 };
            d - beta * (h[i] * dh[j] + dh[i] * h[j]) + beta * beta * hdh * h[i] * h[j]
        });
        let gn = var.sqrt();
        let hg: f64 = h.iter().zip(&g).map(|(a, b)| a * b).sum();
        let q: Vec<f64> = (1..n).map(|i| (g[i] - beta * hg * h[i]) / gn).collect();
        let eig = c.symmetric_eigen();
        let mut atoms = Vec::with_capacity(n - 1);
        let mut weights = Vec::with_capacity(n - 1);
        for k in 0..n - 1 {
            let p: f64 = (0..n - 1).map(|i| eig.eigenvectors[(i, k)] * q[i]).sum();
            atoms.push(eig.eigenvalues[k]);
            weights.push(p * p);
        }
        Some((mean, var, TailMeasure::new(atoms, weights)))
    }

    /// The probability measure proportional to `dmu / |t - z|^2`.
    pub fn reweighted(&self, z: Complex64) -> TailMeasure {
        let weights = self
            .atoms
            .iter()
            .zip(&self.weights)
            .map(|(&t, &w)| w / (t - z).norm_sqr())
            .collect();
        TailMeasure::new(self.atoms.clone(), weights)
    }
}

/// Build the chain for `m` with up to `n_steps` coefficient records.
pub fn run_chain(m: &Measure, nodes: &NodeSequence, n_steps: usize) -> Result<SchurChain> {
    run_chain_with_tol(m, nodes, n_steps, DEFAULT_DEGENERATE_TOL)
}

pub fn run_chain_with_tol(
    m: &Measure,
    nodes: &NodeSequence,
    n_steps: usize,
    degenerate_tol: f64,
) -> Result<SchurChain> {
    if nodes.len() < n_steps {
        return Err(Error::InvalidNodes(format!(
            "{n_steps} steps requested but only {} nodes",
            nodes.len()
        )));
    }
    let mut chain = SchurChain::new(m, nodes.clone()).with_degenerate_tol(degenerate_tol);
    chain.run(n_steps)?;
    Ok(chain)
}

/// Tail value `phi_j(lambda)`.
pub fn phi_chain_eval(chain: &SchurChain, j: usize, lambda: Complex64) -> Result<Complex64> {
    chain.phi(j, lambda)
}

/// Append one step to the chain.
pub fn schur_step(chain: &mut SchurChain) -> Result<SchurStep> {
    chain.step().copied()
}

/// The two Hermitian Pick forms of a truncated interpolation problem.
#[derive(Clone, Debug, PartialEq)]
pub struct PickForms {
    pub k_alpha: DenseMatrix,
    pub k_beta: DenseMatrix,
}

impl PickForms {
    /// Smallest eigenvalues of `(K_alpha, K_beta)`.
    pub fn min_eigenvalues(&self) -> Result<(f64, f64)> {
        let lo = |m: &DenseMatrix| -> Result<f64> {
            Ok(sym_eigs(&hermitian_part(m))?
                .first()
                .copied()
                .unwrap_or(f64::INFINITY))
        };
        Ok((lo(&self.k_alpha)?, lo(&self.k_beta)?))
    }
}

/// Pick forms on the first `n + 1` data points.
pub fn pick_forms(
    z: &[Complex64],
    w: &[Complex64],
    interval: Interval,
    n: usize,
) -> Result<PickForms> {
    if z.len() != w.len() || z.len() < n + 1 {
        return Err(Error::Shape(format!(
            "Pick forms of order {n} need {} nodes and values, got {} and {}",
            n + 1,
            z.len(),
            w.len()
        )));
    }
    if let Some(bad) = z[..=n].iter().find(|z| !(z.im > 0.0)) {
        return Err(Error::InvalidNodes(format!("node {bad} not in the upper half plane")));
    }
    let (alpha, beta) = (interval.alpha, interval.beta);
    let k_alpha = DMatrix::from_fn(n + 1, n + 1, |j, k| {
        (w[j] * (z[j] - alpha) - w[k].conj() * (z[k].conj() - alpha)) / (z[j] - z[k].conj())
    });
    let k_beta = DMatrix::from_fn(n + 1, n + 1, |j, k| {
        (w[j] * (beta - z[j]) - w[k].conj() * (beta - z[k].conj())) / (z[j] - z[k].conj())
    });
    Ok(PickForms { k_alpha, k_beta })
}

/// True iff both forms have smallest eigenvalue at least `-tol`.
pub fn check_solvability(pf: &PickForms, tol: f64) -> bool {
    match pf.min_eigenvalues() {
        Ok((a, b)) => a >= -tol && b >= -tol,
        Err(_) => false,
    }
}

/// Blaschke–Potapov factor of one step.
pub fn transfer_matrix(step: &SchurStep, lambda: Complex64) -> Result<Matrix2<Complex64>> {
    if !(step.b > 0.0) {
        return Err(Error::InvalidData("transfer matrix needs b > 0".into()));
    }
    let d = step.b * (lambda - step.z.conj());
    if d.norm() == 0.0 {
        return Err(Error::PoleHit(lambda));
    }
    let zero = Complex64::new(0.0, 0.0);
    Ok(Matrix2::new(
        zero,
        -1.0 / d,
        step.b * (lambda - step.z),
        step.linear(lambda) / d,
    ))
}

/// Product `W_0(l) W_1(l) ... W_n(l)`.
pub fn transfer_product(chain: &SchurChain, n: usize, lambda: Complex64) -> Result<Matrix2<Complex64>> {
    if n >= chain.steps().len() {
        return Err(Error::ChainTooShort {
            needed: n + 1,
            available: chain.steps().len(),
        });
    }
    chain.steps()[..=n]
        .iter()
        .try_fold(Matrix2::identity(), |acc, s| Ok(acc * transfer_matrix(s, lambda)?))
}

/// `(w11 tau + w12) / (w21 tau + w22)` with `W = W_0 ... W_n` and `tau = tau_eval(lambda)`.
pub fn recover_from_tail<F>(chain: &SchurChain, n: usize, tau_eval: F, lambda: Complex64) -> Result<Complex64>
where
    F: Fn(Complex64) -> Result<Complex64>,
{
    let w = transfer_product(chain, n, lambda)?;
    let tau = tau_eval(lambda)?;
    let den = w[(1, 0)] * tau + w[(1, 1)];
    if den.norm() == 0.0 {
        return Err(Error::ZeroDenominator(lambda));
    }
    Ok((w[(0, 0)] * tau + w[(0, 1)]) / den)
}
