//! Batch command-line interface: experiment configuration, the subcommands and
//! their CSV/JSON artifacts.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::biorth::{self, GramFactor, KappaMode, MeasureFunctional, Moments, R2Data};
use crate::error::{Error, Result};
use crate::measure::{Interval, Measure, MeasureSpec, NodeSequence, WeightName, WeightParams};
use crate::numerics::{sym_eigs, Complex64, Polynomial};
use crate::oracle;
use crate::pencil;
use crate::recurrence;
use crate::schur::{self, SchurChain, StepField};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_DEGENERATE: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;
pub const EXIT_CHECK: i32 = 4;

/// Probes closer than this to the interval are rejected.
pub const PROBE_MARGIN: f64 = 1e-12;

const NODE_ORDER: &str = "z0, conj z0, z1, conj z1, ...";

const HELP_NODES: &str = "\
Node generators (config key \"nodes\"):
  {\"pattern\": \"vertical\", \"base\": b, \"spacing\": s, \"re\": x, \"count\": N, \"delta\": d}
      z_k = x + b (1 + k s) i, k = 0..N-1 (spacing defaults to 0.25, re to 0)
  {\"pattern\": \"arc\", \"center\": c, \"radius\": r, \"count\": N, \"delta\": d}
      z_k = c + r e^{i t_k} + d i, t_k = pi (k + 1) / (N + 1)
      (center defaults to the interval midpoint)
  {\"pattern\": \"list\", \"points\": [[re, im], ...], \"delta\": d}
Every node must satisfy Im z >= delta. \"count\" defaults to n_max + 1.

Exit codes: 0 ok, 1 configuration, 2 degenerate data, 3 numerical failure,
4 check failure.";

#[derive(Debug, Parser)]
#[command(
    name = "markov-pade",
    version,
    about = "Multipoint Pade approximants to Markov functions",
    after_help = HELP_NODES
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Experiment configuration (JSON). Defaults to the built-in Chebyshev experiment.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory; overrides `outputs.dir`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Seed for randomized checks; overrides `seed`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Degeneracy threshold of the Schur chain; overrides `tolerances.degenerate`.
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    /// Restrict `check` to one module.
    #[arg(long, global = true, value_enum)]
    pub only: Option<Module>,
    /// Also cross-validate against the interpolation oracle.
    #[arg(long, global = true)]
    pub oracle: bool,
    /// Fill the `ms` column of the convergence table.
    #[arg(long, global = true)]
    pub timing: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Run the chain; write its coefficients and the P, Q polynomials.
    Approx,
    /// Tabulate |R_n - phi| on the probe grid.
    Converge,
    /// Run the invariant suite.
    Check,
    /// Write pencil sections, spectra and J2 factorizations.
    Pencil,
    /// Write the biorthogonal system and its Gram report.
    Biorth,
    /// Compare the chain against the dense interpolation solver.
    Oracle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Module {
    Measure,
    Schur,
    Recurrence,
    Pencil,
    Biorth,
    Oracle,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub measure: MeasureSpec,
    pub nodes: NodesSpec,
    pub n_max: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eval_grid: Option<GridSpec>,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub outputs: Outputs,
    #[serde(default)]
    pub seed: u64,
    /// Shift one coefficient of the chain feeding the pencil (fault injection).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tamper: Option<Tamper>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "pattern", rename_all = "lowercase", deny_unknown_fields)]
pub enum NodesSpec {
    Vertical {
        base: f64,
        #[serde(default = "default_spacing")]
        spacing: f64,
        #[serde(default)]
        re: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        count: Option<usize>,
        delta: f64,
    },
    Arc {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        center: Option<f64>,
        radius: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        count: Option<usize>,
        delta: f64,
    },
    List {
        points: Vec<Complex64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        delta: Option<f64>,
    },
}

fn default_spacing() -> f64 {
    0.25
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum GridSpec {
    Points(Vec<Complex64>),
    Circle {
        #[serde(default)]
        center: Complex64,
        radius: f64,
        count: usize,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub degenerate: f64,
    pub identity: f64,
    pub spectrum: f64,
    pub resolvent: f64,
    pub orthogonality: f64,
    pub pick: f64,
    pub gram_offdiag: f64,
    pub gram_diagonal: f64,
    pub determinant: f64,
    pub pp_kap: f64,
    pub first_order: f64,
    pub monic: f64,
    pub oracle: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            degenerate: schur::DEFAULT_DEGENERATE_TOL,
            identity: 1e-9,
            spectrum: 1e-8,
            resolvent: 1e-10,
            orthogonality: 1e-8,
            pick: 1e-10,
            gram_offdiag: 1e-7,
            gram_diagonal: 1e-6,
            determinant: 1e-6,
            pp_kap: 1e-6,
            first_order: 1e-8,
            monic: 1e-10,
            oracle: 1e-7,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Outputs {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tamper {
    pub index: usize,
    pub field: TamperField,
    pub delta: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TamperField {
    A1,
    A2,
    B,
}

impl From<TamperField> for StepField {
    fn from(f: TamperField) -> Self {
        match f {
            TamperField::A1 => StepField::A1,
            TamperField::A2 => StepField::A2,
            TamperField::B => StepField::B,
        }
    }
}

impl Default for ExperimentConfig {
    /// Chebyshev measure on `[-1, 1]`, eight steps on an arc of radius 1.5,
    /// probes on the circle `|l| = 3`.
    fn default() -> Self {
        Self {
            measure: MeasureSpec::Weight {
                interval: Interval { alpha: -1.0, beta: 1.0 },
                name: WeightName::Chebyshev1,
                params: WeightParams::default(),
                quad_order: crate::measure::DEFAULT_QUAD_ORDER,
            },
            nodes: NodesSpec::Arc {
                center: None,
                radius: 1.5,
                count: None,
                delta: 0.2,
            },
            n_max: 8,
            eval_grid: Some(GridSpec::Circle {
                center: Complex64::new(0.0, 0.0),
                radius: 3.0,
                count: 16,
            }),
            tolerances: Tolerances::default(),
            outputs: Outputs::default(),
            seed: 0,
            tamper: None,
        }
    }
}

impl ExperimentConfig {
    /// Parse JSON; errors name the offending key.
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            if path == "." || path.is_empty() {
                Error::Config(e.into_inner().to_string())
            } else {
                Error::Config(format!("key `{path}`: {}", e.into_inner()))
            }
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

/// A validated configuration with its measure, nodes and probe grid built.
#[derive(Clone, Debug)]
pub struct Experiment {
    pub config: ExperimentConfig,
    pub measure: Measure,
    pub nodes: NodeSequence,
    pub grid: Vec<Complex64>,
}

fn config_err(key: &str, e: impl std::fmt::Display) -> Error {
    Error::Config(format!("key `{key}`: {e}"))
}

impl Experiment {
    pub fn new(config: ExperimentConfig) -> Result<Self> {
        let measure = config.measure.build().map_err(|e| config_err("measure", e))?;
        let interval = measure.interval();
        let count = |c: Option<usize>| c.unwrap_or(config.n_max + 1);
        let nodes = match &config.nodes {
            NodesSpec::Vertical {
                base,
                spacing,
                re,
                count: c,
                delta,
            } => NodeSequence::vertical(*base, *spacing, *re, count(*c), *delta),
            NodesSpec::Arc {
                center,
                radius,
                count: c,
                delta,
            } => {
                let center = center.unwrap_or(0.5 * (interval.alpha + interval.beta));
                NodeSequence::arc(center, *radius, count(*c), *delta)
            }
            NodesSpec::List { points, delta } => match delta {
                Some(d) => NodeSequence::new(points.clone(), *d),
                None => NodeSequence::from_nodes(points.clone()),
            },
        }
        .map_err(|e| config_err("nodes", e))?;
        let grid = match &config.eval_grid {
            Some(GridSpec::Points(p)) => p.clone(),
            Some(GridSpec::Circle {
                center,
                radius,
                count,
            }) => circle(*center, *radius, *count),
            None => circle(
                Complex64::new(0.5 * (interval.alpha + interval.beta), 0.0),
                1.5 * (interval.beta - interval.alpha),
                16,
            ),
        };
        for (k, &l) in grid.iter().enumerate() {
            if !(l.re.is_finite() && l.im.is_finite()) || interval.dist(l) <= PROBE_MARGIN * (1.0 + l.norm()) {
                return Err(config_err(
                    &format!("eval_grid[{k}]"),
                    format!("probe {l} lies on the support interval [{}, {}]", interval.alpha, interval.beta),
                ));
            }
        }
        let t = &config.tolerances;
        for (name, v) in [
            ("degenerate", t.degenerate),
            ("identity", t.identity),
            ("spectrum", t.spectrum),
            ("resolvent", t.resolvent),
            ("orthogonality", t.orthogonality),
            ("pick", t.pick),
            ("gram_offdiag", t.gram_offdiag),
            ("gram_diagonal", t.gram_diagonal),
            ("determinant", t.determinant),
            ("pp_kap", t.pp_kap),
            ("first_order", t.first_order),
            ("monic", t.monic),
            ("oracle", t.oracle),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(config_err(&format!("tolerances.{name}"), format!("{v} is not a nonnegative number")));
            }
        }
        Ok(Self {
            config,
            measure,
            nodes,
            grid,
        })
    }

    pub fn interval(&self) -> Interval {
        self.measure.interval()
    }

    /// Chain with up to `steps` records, fewer when the nodes run out or the chain terminates.
    pub fn chain(&self, steps: usize) -> Result<SchurChain> {
        let mut chain =
            SchurChain::new(&self.measure, self.nodes.clone()).with_degenerate_tol(self.config.tolerances.degenerate);
        chain.run(steps.min(self.nodes.len()))?;
        Ok(chain)
    }

    /// Chain supporting `R_0 .. R_{n_max}` where the data allow it.
    pub fn full_chain(&self) -> Result<SchurChain> {
        self.chain(self.config.n_max + 1)
    }
}

/// `count` points `center + radius e^{i t_k}`, `t_k = 2 pi (k + 1/2) / count`.
pub fn circle(center: Complex64, radius: f64, count: usize) -> Vec<Complex64> {
    (0..count)
        .map(|k| {
            let t = std::f64::consts::TAU * (k as f64 + 0.5) / count as f64;
            center + Complex64::from_polar(radius, t)
        })
        .collect()
}

/// Index of the last convergent the chain supports.
fn last_order(chain: &SchurChain) -> Option<usize> {
    chain.len().checked_sub(1)
}

/// Full-precision scientific notation (17 significant digits).
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Write `contents` to `dir/name` through a temporary file and an atomic rename.
pub fn write_atomic(dir: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents.as_bytes())?;
    tmp.flush()?;
    let path = dir.join(name);
    tmp.persist(&path).map_err(|e| Error::Io(e.error.to_string()))?;
    Ok(path)
}

fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("report serializes");
    s.push('\n');
    s
}

/// Exit status for a library error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_)
        | Error::Io(_)
        | Error::InvalidMeasure(_)
        | Error::InvalidNodes(_)
        | Error::PointOnSupport(_)
        | Error::DuplicatePoints => EXIT_CONFIG,
        Error::DegenerateStep { .. }
        | Error::ChainTerminated
        | Error::DegenerateMoment(_)
        | Error::DegenerateLeading(_)
        | Error::KappaDegenerate
        | Error::XiUnit(_)
        | Error::SingularDelta(_)
        | Error::EqualPoles(_)
        | Error::RankDeficient { .. }
        | Error::NormalCaseViolation(_) => EXIT_DEGENERATE,
        _ => EXIT_NUMERIC,
    }
}

// ---------------------------------------------------------------- approx

#[derive(Clone, Debug, Serialize)]
pub struct StepRecord {
    pub z: Complex64,
    pub a1: f64,
    pub a2: f64,
    pub b: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct PolyTable {
    #[serde(rename = "P")]
    pub p: Vec<Vec<f64>>,
    #[serde(rename = "Q")]
    pub q: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ApproxReport {
    pub steps: Vec<StepRecord>,
    pub polys: PolyTable,
    pub terminated: bool,
    /// Index of the record that ended the chain.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub terminated_at: Option<usize>,
}

fn real_coeffs(p: &Polynomial) -> Vec<f64> {
    p.coeffs().iter().map(|c| c.re).collect()
}

pub fn approx_report(exp: &Experiment) -> Result<ApproxReport> {
    let chain = exp.chain(exp.config.n_max)?;
    let steps = chain
        .records()
        .map(|s| StepRecord {
            z: s.z,
            a1: s.a1,
            a2: s.a2,
            b: s.b,
        })
        .collect();
    let polys = match last_order(&chain) {
        Some(n) => {
            let pair = recurrence::build_polys(&chain, n)?;
            PolyTable {
                p: pair.p.iter().map(real_coeffs).collect(),
                q: pair.q.iter().map(real_coeffs).collect(),
            }
        }
        None => PolyTable {
            p: vec![vec![1.0]],
            q: vec![vec![0.0]],
        },
    };
    Ok(ApproxReport {
        steps,
        polys,
        terminated: chain.is_terminated(),
        terminated_at: chain.is_terminated().then(|| chain.len() - 1),
    })
}

impl ApproxReport {
    /// Rows `poly,j,k,coeff`: coefficient of `l^k` in `P_j` or `Q_j`.
    pub fn coefficients_csv(&self) -> String {
        let mut s = String::from("poly,j,k,coeff\n");
        for (name, table) in [("P", &self.polys.p), ("Q", &self.polys.q)] {
            for (j, c) in table.iter().enumerate() {
                for (k, v) in c.iter().enumerate() {
                    s.push_str(&format!("{name},{j},{k},{}\n", fmt_f64(*v)));
                }
            }
        }
        s
    }
}

// ---------------------------------------------------------------- converge

#[derive(Clone, Debug, Serialize)]
pub struct ConvergenceRow {
    pub n: usize,
    pub lambda: Complex64,
    pub abs_error: f64,
    /// `1 / dist(l, [alpha, beta])`.
    pub bound: f64,
    pub abs_convergent: f64,
    pub ms: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConvergenceReport {
    pub rows: Vec<ConvergenceRow>,
    pub n_requested: usize,
    /// Largest `n` with a row; below `n_requested` when the chain stopped early.
    pub n_reached: usize,
    pub terminated_early: bool,
}

impl ConvergenceReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("n,re_lambda,im_lambda,abs_error,bound,ms\n");
        for r in &self.rows {
            let ms = r.ms.map(fmt_f64).unwrap_or_default();
            s.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.n,
                fmt_f64(r.lambda.re),
                fmt_f64(r.lambda.im),
                fmt_f64(r.abs_error),
                fmt_f64(r.bound),
                ms
            ));
        }
        s
    }

    /// Errors at order `n` in probe order.
    pub fn errors_at(&self, n: usize) -> Vec<f64> {
        self.rows.iter().filter(|r| r.n == n).map(|r| r.abs_error).collect()
    }

    /// Largest `|R_n(l)| - bound` over all rows.
    pub fn max_bound_excess(&self) -> f64 {
        self.rows
            .iter()
            .map(|r| r.abs_convergent - r.bound)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

pub fn convergence_report(exp: &Experiment, timing: bool) -> Result<ConvergenceReport> {
    let chain = exp.full_chain()?;
    let m = chain.measure();
    let interval = exp.interval();
    let phi = exp
        .grid
        .iter()
        .map(|&l| m.eval_markov(l))
        .collect::<Result<Vec<_>>>()?;
    let n_reached = last_order(&chain).unwrap_or(0).min(exp.config.n_max);
    let mut rows = Vec::new();
    for n in 1..=n_reached {
        for (&l, f) in exp.grid.iter().zip(&phi) {
            let start = Instant::now();
            let r = recurrence::eval_convergent(&chain, n, l)?;
            let ms = timing.then(|| start.elapsed().as_secs_f64() * 1e3);
            rows.push(ConvergenceRow {
                n,
                lambda: l,
                abs_error: (r - f).norm(),
                bound: 1.0 / interval.dist(l),
                abs_convergent: r.norm(),
                ms,
            });
        }
    }
    Ok(ConvergenceReport {
        rows,
        n_requested: exp.config.n_max,
        n_reached,
        terminated_early: n_reached < exp.config.n_max,
    })
}

// ---------------------------------------------------------------- oracle

#[derive(Clone, Debug, Serialize)]
pub struct OracleOrder {
    pub n: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_diff: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip)]
    code: i32,
}

#[derive(Clone, Debug, Serialize)]
pub struct OracleReport {
    pub orders: Vec<OracleOrder>,
    pub tolerance: f64,
    pub passed: bool,
    #[serde(skip)]
    pub rows: Vec<oracle::CrossValidation>,
}

impl OracleReport {
    /// Rows `n,re_lambda,im_lambda,re_rn,im_rn,re_oracle,im_oracle,abs_diff`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("n,re_lambda,im_lambda,re_rn,im_rn,re_oracle,im_oracle,abs_diff\n");
        for cv in &self.rows {
            for (l, r, o, d) in &cv.rows {
                s.push_str(&format!(
                    "{},{},{},{},{},{},{},{}\n",
                    cv.n,
                    fmt_f64(l.re),
                    fmt_f64(l.im),
                    fmt_f64(r.re),
                    fmt_f64(r.im),
                    fmt_f64(o.re),
                    fmt_f64(o.im),
                    fmt_f64(*d)
                ));
            }
        }
        s
    }

    pub fn exit_code(&self) -> i32 {
        if self.orders.iter().any(|o| o.max_diff.is_some_and(|d| !(d <= self.tolerance))) {
            EXIT_CHECK
        } else {
            self.orders.iter().map(|o| o.code).max().unwrap_or(EXIT_OK)
        }
    }
}

pub fn oracle_report(exp: &Experiment) -> Result<OracleReport> {
    let chain = exp.full_chain()?;
    let tol = exp.config.tolerances.oracle;
    let mut orders = Vec::new();
    let mut rows = Vec::new();
    if let Some(last) = last_order(&chain) {
        for n in 0..=last.min(exp.config.n_max) {
            match oracle::cross_validate(&chain, n, &exp.grid) {
                Ok(cv) => {
                    orders.push(OracleOrder {
                        n,
                        max_diff: Some(cv.max_diff),
                        error: None,
                        code: EXIT_OK,
                    });
                    rows.push(cv);
                }
                Err(e) => orders.push(OracleOrder {
                    n,
                    max_diff: None,
                    error: Some(e.to_string()),
                    code: exit_code(&e),
                }),
            }
        }
    }
    let passed = orders.iter().all(|o| o.max_diff.is_some_and(|d| d <= tol));
    Ok(OracleReport {
        orders,
        tolerance: tol,
        passed,
        rows,
    })
}

// ---------------------------------------------------------------- pencil

#[derive(Clone, Debug, Serialize)]
pub struct PencilEntry {
    pub n: usize,
    pub section: pencil::SectionRecord,
    pub eigenvalues: Vec<f64>,
    pub j2_min_eigenvalue: f64,
    pub j2_inverse_corner: f64,
    pub j2_last_diagonal_discrepancy: f64,
    pub j2_factor_error: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct PencilReport {
    pub interval: Interval,
    pub sections: Vec<PencilEntry>,
    /// Largest distance of an eigenvalue outside the interval.
    pub spectrum_outside: f64,
    pub j2_positive: bool,
}

impl PencilReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.spectrum_outside <= tol && self.j2_positive
    }
}

pub fn pencil_report(exp: &Experiment) -> Result<PencilReport> {
    let chain = exp.full_chain()?;
    let interval = exp.interval();
    let mut sections = Vec::new();
    if let Some(last) = last_order(&chain) {
        for n in 0..=last.min(exp.config.n_max) {
            let s = pencil::build_section(&chain, 0, n)?;
            let eigenvalues = pencil::gevp_spectrum(&s)?;
            let j2_min_eigenvalue = sym_eigs(&s.j2.to_dense())?.first().copied().unwrap_or(f64::NAN);
            let f = pencil::j2_factorize(&s)?;
            sections.push(PencilEntry {
                n,
                section: s.record(),
                eigenvalues,
                j2_min_eigenvalue,
                j2_inverse_corner: s.j2_inverse_corner()?,
                j2_last_diagonal_discrepancy: f.last_diagonal_discrepancy,
                j2_factor_error: f.max_other_error,
            });
        }
    }
    let spectrum_outside = sections
        .iter()
        .flat_map(|s| s.eigenvalues.iter())
        .map(|&x| (interval.alpha - x).max(x - interval.beta).max(0.0))
        .fold(0.0, f64::max);
    let j2_positive = sections.iter().all(|s| s.j2_min_eigenvalue > 0.0);
    Ok(PencilReport {
        interval,
        sections,
        spectrum_outside,
        j2_positive,
    })
}

// ---------------------------------------------------------------- biorth

#[derive(Clone, Debug, Serialize)]
pub struct NuRow {
    pub n: usize,
    pub nu: [Complex64; 4],
    pub monic_defect: f64,
    pub coeff_error: f64,
    pub p_recovery_error: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct BiorthReport {
    pub data: R2Data,
    pub kappa: Vec<Complex64>,
    pub xi: Vec<Complex64>,
    pub h: Vec<Complex64>,
    pub gram: biorth::GramReport,
    pub nu: Vec<NuRow>,
    pub pp_kap: Vec<biorth::PpKapReport>,
    pub determinant_route_error: f64,
    pub passed: bool,
}

impl BiorthReport {
    /// Rows `n,m,re,im,abs` of the Gram matrix.
    pub fn gram_csv(&self) -> String {
        let mut s = String::from("n,m,re,im,abs\n");
        for (i, row) in self.gram.gram.iter().enumerate() {
            for (j, g) in row.iter().enumerate() {
                s.push_str(&format!("{i},{j},{},{},{}\n", fmt_f64(g.re), fmt_f64(g.im), fmt_f64(g.norm())));
            }
        }
        s
    }
}

/// Probes for comparing rational functions away from the poles.
fn comparison_probes(interval: Interval) -> Vec<Complex64> {
    let mid = 0.5 * (interval.alpha + interval.beta);
    let w = interval.beta - interval.alpha;
    [(1.5, 0.0), (0.0, 1.5), (0.5, 1.0), (-1.0, 0.25), (0.25, -0.75)]
        .iter()
        .map(|&(x, y)| Complex64::new(mid + x * w, y * w))
        .collect()
}

pub fn biorth_report(exp: &Experiment) -> Result<BiorthReport> {
    let chain = exp.full_chain()?;
    let big_n = chain.len();
    if big_n < 2 {
        return Err(Error::ChainTooShort {
            needed: 2,
            available: big_n,
        });
    }
    let t = &exp.config.tolerances;
    let m = chain.measure();
    let data = biorth::from_chain(&chain, big_n, KappaMode::Quadrature)?;
    let sys = biorth::build_system(data.clone())?;
    let n = big_n - 1;
    let gram = biorth::check_biorthogonality(&sys, &MeasureFunctional(m), n)?;
    let nu = (0..big_n)
        .map(|k| {
            biorth::first_order_system(&sys, k).map(|s| NuRow {
                n: k,
                nu: s.nu,
                monic_defect: s.monic_defect,
                coeff_error: s.coeff_error,
                p_recovery_error: s.p_recovery_error,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let moments = Moments::Factor(GramFactor::new(m, &data, big_n)?);
    let pp_kap = (1..=n)
        .map(|k| biorth::check_pp_kap(&sys, &moments, k))
        .collect::<Result<Vec<_>>>()?;
    let probes = comparison_probes(exp.interval());
    let mut determinant_route_error: f64 = 0.0;
    for k in 0..=n.min(biorth::DETERMINANT_MAX_ORDER) {
        let f = biorth::determinant_forms(&data, &moments, k)?;
        determinant_route_error = determinant_route_error.max(biorth::determinant_agreement(&sys, &f, &probes));
    }
    let passed = gram.passes(t.gram_offdiag, t.gram_diagonal)
        && determinant_route_error <= t.determinant
        && pp_kap.iter().all(|r| r.residual <= t.pp_kap)
        && nu.iter().all(|r| r.monic_defect <= t.monic && r.coeff_error <= t.first_order);
    Ok(BiorthReport {
        kappa: sys.kappa.clone(),
        xi: sys.xi.clone(),
        h: sys.h.clone(),
        data,
        gram,
        nu,
        pp_kap,
        determinant_route_error,
        passed,
    })
}

// ---------------------------------------------------------------- check

#[derive(Clone, Debug, Serialize)]
pub struct CheckResult {
    pub module: Module,
    pub name: String,
    pub value: f64,
    /// `"<="` or `">"`: how `value` is compared against `limit`.
    pub relation: &'static str,
    pub limit: f64,
    pub passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct CheckSuite {
    /// Order of the last convergent checked.
    pub n: usize,
    pub seed: u64,
    pub node_order: &'static str,
    pub checks: Vec<CheckResult>,
    pub passed: bool,
}

impl CheckSuite {
    pub fn summary(&self) -> String {
        let mut s = String::new();
        for c in &self.checks {
            let status = if c.passed { "PASS" } else { "FAIL" };
            s.push_str(&format!(
                "{status} {:<10} {:<24} {:>12.3e} {} {:.1e}",
                format!("{:?}", c.module).to_lowercase(),
                c.name,
                c.value,
                c.relation,
                c.limit
            ));
            if let Some(d) = &c.detail {
                s.push_str(&format!("  ({d})"));
            }
            s.push('\n');
        }
        let failed = self.checks.iter().filter(|c| !c.passed).count();
        s.push_str(&format!("{} checks, {failed} failed\n", self.checks.len()));
        s
    }
}

struct Suite {
    only: Option<Module>,
    checks: Vec<CheckResult>,
}

impl Suite {
    fn wants(&self, m: Module) -> bool {
        self.only.is_none_or(|o| o == m)
    }

    fn push(&mut self, module: Module, name: &str, relation: &'static str, limit: f64, value: Result<f64>) {
        let (value, passed, detail) = match value {
            Ok(v) => {
                let ok = match relation {
                    ">" => v > limit,
                    _ => v <= limit,
                };
                (v, ok, None)
            }
            Err(e) => (f64::NAN, false, Some(e.to_string())),
        };
        self.checks.push(CheckResult {
            module,
            name: name.to_string(),
            value,
            relation,
            limit,
            passed,
            detail,
        });
    }

    fn at_most(&mut self, module: Module, name: &str, limit: f64, value: Result<f64>) {
        self.push(module, name, "<=", limit, value);
    }
}

fn max_over<I: IntoIterator<Item = Result<f64>>>(it: I) -> Result<f64> {
    it.into_iter().try_fold(0.0, |acc: f64, v| Ok(acc.max(v?)))
}

pub fn check_suite(exp: &Experiment, only: Option<Module>, seed: u64) -> Result<CheckSuite> {
    let chain = exp.full_chain()?;
    let t = exp.config.tolerances.clone();
    let interval = exp.interval();
    let m = chain.measure();
    let grid = &exp.grid;
    let last = last_order(&chain).map(|n| n.min(exp.config.n_max));
    let mut s = Suite {
        only,
        checks: Vec::new(),
    };

    if s.wants(Module::Measure) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w = interval.beta - interval.alpha;
        let probes: Vec<Complex64> = (0..64)
            .map(|_| {
                Complex64::new(
                    rng.random_range(interval.alpha - w..interval.beta + w),
                    rng.random_range(1e-3..w),
                )
            })
            .collect();
        let min_im = probes
            .iter()
            .map(|&l| m.eval_markov(l).map(|f| f.im))
            .try_fold(f64::INFINITY, |acc, v| v.map(|v| acc.min(v)));
        s.push(Module::Measure, "nevanlinna_min_im", ">", 0.0, min_im);
        let sym = max_over(probes.iter().map(|&l| {
            let a = m.eval_markov(l)?;
            let b = m.eval_markov(l.conj())?;
            Ok((b - a.conj()).norm() / a.norm())
        }));
        s.at_most(Module::Measure, "real_symmetry", 1e-14, sym);
        let bound = max_over(grid.iter().map(|&l| Ok(m.eval_markov(l)?.norm() * interval.dist(l) / m.mass())));
        s.at_most(Module::Measure, "markov_bound", 1.0 + 1e-12, bound.map(|b| b.max(0.0)));
    }

    if s.wants(Module::Schur) {
        let conn = max_over(chain.records().map(|r| Ok((r.a2 - 1.0 - r.b * r.b).abs() / r.a2)));
        s.at_most(Module::Schur, "connection", t.identity, conn);
        let pick = (|| -> Result<f64> {
            let Some(n) = last else { return Ok(0.0) };
            let z = &exp.nodes.as_slice()[..=n];
            let w = oracle::sample_markov(m, z)?;
            let pf = schur::pick_forms(z, &w, interval, n)?;
            let (a, b) = pf.min_eigenvalues()?;
            let scale = pf.k_alpha.norm().max(pf.k_beta.norm()).max(f64::MIN_POSITIVE);
            Ok((-a.min(b) / scale).max(0.0))
        })();
        s.at_most(Module::Schur, "pick_negativity", t.pick, pick);
    }

    if s.wants(Module::Recurrence) {
        let ort = (|| -> Result<f64> {
            match chain.steps().len().checked_sub(1) {
                Some(n) => Ok(recurrence::check_np_orthogonality(&chain, m, n.min(exp.config.n_max))?.max_residual()),
                None => Ok(0.0),
            }
        })();
        s.at_most(Module::Recurrence, "np_orthogonality", t.orthogonality, ort);
        let zeros = (|| -> Result<(f64, f64)> {
            let Some(last) = last else { return Ok((0.0, 0.0)) };
            let pair = recurrence::build_polys(&chain, last)?;
            let mut outside: f64 = 0.0;
            let mut failures = 0.0;
            for n in 0..=last {
                let sub = recurrence::PolyPair {
                    p: pair.p[..=n + 1].to_vec(),
                    q: pair.q[..=n + 1].to_vec(),
                };
                let rep = recurrence::check_zeros(&sub, interval)?;
                outside = outside.max(rep.outside);
                if !rep.interlaced {
                    failures += 1.0;
                }
            }
            Ok((outside, failures))
        })();
        s.at_most(Module::Recurrence, "zeros_outside", t.spectrum, zeros.clone().map(|z| z.0));
        s.at_most(Module::Recurrence, "interlacing_failures", 0.0, zeros.map(|z| z.1));
    }

    if s.wants(Module::Pencil) {
        let tampered = match exp.config.tamper {
            Some(tp) => chain.perturbed(tp.index, tp.field.into(), tp.delta),
            None => Ok(chain.clone()),
        };
        let orders: Vec<usize> = last.map(|l| (0..=l).collect()).unwrap_or_default();
        let ident = tampered.and_then(|pc| {
            max_over(
                orders
                    .iter()
                    .map(|&n| Ok(pencil::check_mfunction_identity_with(&pc, &chain, n, grid)?.max_residual)),
            )
        });
        s.at_most(Module::Pencil, "m_function_identity", t.identity, ident);
        let riccati = match last {
            Some(l) if l > 0 => {
                max_over((0..l).map(|j| Ok(pencil::riccati_check(&chain, j, l, grid)?.max_residual)))
            }
            _ => Ok(0.0),
        };
        s.at_most(Module::Pencil, "riccati", t.identity, riccati);
        let sections = orders
            .iter()
            .map(|&n| pencil::build_section(&chain, 0, n))
            .collect::<Result<Vec<_>>>();
        let spectrum = sections.as_ref().map_err(Clone::clone).and_then(|secs| {
            max_over(secs.iter().map(|sec| {
                Ok(pencil::gevp_spectrum(sec)?
                    .iter()
                    .map(|&x| (interval.alpha - x).max(x - interval.beta).max(0.0))
                    .fold(0.0, f64::max))
            }))
        });
        s.at_most(Module::Pencil, "spectrum_outside", t.spectrum, spectrum);
        let j2_min = sections.as_ref().map_err(Clone::clone).and_then(|secs| {
            secs.iter().try_fold(f64::INFINITY, |acc, sec| {
                Ok(acc.min(sym_eigs(&sec.j2.to_dense())?.first().copied().unwrap_or(f64::INFINITY)))
            })
        });
        s.push(Module::Pencil, "j2_min_eigenvalue", ">", 0.0, j2_min);
        let factor = sections
            .as_ref()
            .map_err(Clone::clone)
            .and_then(|secs| max_over(secs.iter().map(|sec| Ok(pencil::j2_factorize(sec)?.max_other_error))));
        s.at_most(Module::Pencil, "j2_factorization", t.identity, factor);
        let resolvent = orders
            .iter()
            .map(|&n| pencil::resolvent_bound_check(&chain, n, grid))
            .collect::<Result<Vec<_>>>();
        let corner = resolvent
            .as_ref()
            .map_err(Clone::clone)
            .map(|r| r.iter().map(|x| x.j2_inverse_corner).fold(0.0, f64::max));
        s.at_most(Module::Pencil, "j2_inverse_corner", 1.0 + t.resolvent, corner);
        let scaled = resolvent
            .map(|r| r.iter().map(|x| x.max_scaled_convergent).fold(0.0, f64::max));
        s.at_most(Module::Pencil, "scaled_convergent", 1.0 + t.resolvent, scaled);
    }

    if s.wants(Module::Biorth) {
        let names = [
            ("gram_offdiag", t.gram_offdiag),
            ("gram_diagonal", t.gram_diagonal),
            ("determinant_route", t.determinant),
            ("pp_kap", t.pp_kap),
            ("nu_monicity", t.monic),
            ("first_order", t.first_order),
        ];
        match biorth_report(exp) {
            Ok(rep) => {
                let values = [
                    rep.gram.max_offdiag / rep.gram.max_h,
                    rep.gram.max_diag_rel_error,
                    rep.determinant_route_error,
                    rep.pp_kap.iter().map(|r| r.residual).fold(0.0, f64::max),
                    rep.nu.iter().map(|r| r.monic_defect).fold(0.0, f64::max),
                    rep.nu.iter().map(|r| r.coeff_error).fold(0.0, f64::max),
                ];
                for ((name, limit), v) in names.iter().zip(values) {
                    s.at_most(Module::Biorth, name, *limit, Ok(v));
                }
                let mut d = rep.data.clone();
                d.kappa1 = d.kappa0;
                let deg = biorth::kappa_degeneration_check(&d);
                s.at_most(Module::Biorth, "kappa_degeneration", t.monic, Ok(deg.max_rel_deviation));
            }
            Err(e) => {
                for (name, limit) in names {
                    s.at_most(Module::Biorth, name, limit, Err(e.clone()));
                }
            }
        }
    }

    if s.wants(Module::Oracle) {
        let eq = oracle_report(exp).and_then(|rep| match rep.orders.iter().find(|o| o.error.is_some()) {
            Some(o) => Err(Error::InvariantViolated(format!(
                "order {}: {}",
                o.n,
                o.error.as_deref().unwrap_or_default()
            ))),
            None => Ok(rep.orders.iter().filter_map(|o| o.max_diff).fold(0.0, f64::max)),
        });
        s.at_most(Module::Oracle, "equivalence", t.oracle, eq);
        let ort = match last {
            Some(l) => (|| -> Result<f64> {
                let pair = recurrence::build_polys(&chain, l)?;
                max_over((0..=l).map(|n| {
                    let pts = oracle::conjugate_pair_order(&exp.nodes.as_slice()[..=n]);
                    let vals = oracle::sample_markov(m, &pts)?;
                    Ok(oracle::check_ort_pi(&pair.p[n + 1], &pts, &vals)?.max_residual())
                }))
            })(),
            None => Ok(0.0),
        };
        s.at_most(Module::Oracle, "ort_pi", t.orthogonality, ort);
        let biort = match last {
            Some(l) => (|| -> Result<f64> {
                let pts = oracle::conjugate_pair_order(&exp.nodes.as_slice()[..=l]);
                let vals = oracle::sample_markov(m, &pts)?;
                let rep = oracle::check_biort_pi(&pts, &vals, l)?;
                Ok(rep.max_offdiag / rep.max_diag)
            })(),
            None => Ok(0.0),
        };
        s.at_most(Module::Oracle, "biort_pi", t.gram_diagonal, biort);
    }

    let passed = s.checks.iter().all(|c| c.passed);
    Ok(CheckSuite {
        n: last.unwrap_or(0),
        seed,
        node_order: NODE_ORDER,
        checks: s.checks,
        passed,
    })
}

// ---------------------------------------------------------------- driver

/// Load the configuration and apply the command-line overrides.
pub fn resolve_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(tol) = cli.tol {
        cfg.tolerances.degenerate = tol;
    }
    if let Some(out) = &cli.out {
        cfg.outputs.dir = Some(out.clone());
    }
    Ok(cfg)
}

fn out_dir(cfg: &ExperimentConfig) -> PathBuf {
    cfg.outputs.dir.clone().unwrap_or_else(|| PathBuf::from("out"))
}

fn announce(path: PathBuf) {
    println!("wrote {}", path.display());
}

fn write_oracle(exp: &Experiment, dir: &Path) -> Result<i32> {
    let rep = oracle_report(exp)?;
    announce(write_atomic(dir, "oracle.csv", &rep.to_csv())?);
    announce(write_atomic(dir, "oracle.json", &to_json(&rep))?);
    for o in &rep.orders {
        match (&o.max_diff, &o.error) {
            (Some(d), _) => println!("n = {:>3}  max |R_n - oracle| = {d:.3e}", o.n),
            (None, Some(e)) => println!("n = {:>3}  {e}", o.n),
            _ => {}
        }
    }
    Ok(rep.exit_code())
}

/// Run one subcommand; returns the exit status.
pub fn execute(cli: &Cli, exp: &Experiment) -> Result<i32> {
    let dir = out_dir(&exp.config);
    let mut code = match cli.command {
        Command::Approx => {
            let rep = approx_report(exp)?;
            announce(write_atomic(&dir, "chain.json", &to_json(&rep))?);
            announce(write_atomic(&dir, "coefficients.csv", &rep.coefficients_csv())?);
            if rep.terminated {
                println!("chain terminated at step {}", rep.terminated_at.unwrap_or(0));
                EXIT_DEGENERATE
            } else {
                EXIT_OK
            }
        }
        Command::Converge => {
            let rep = convergence_report(exp, cli.timing)?;
            announce(write_atomic(&dir, "convergence.csv", &rep.to_csv())?);
            #[derive(Serialize)]
            struct Meta {
                n_requested: usize,
                n_reached: usize,
                terminated_early: bool,
                max_bound_excess: f64,
            }
            let meta = Meta {
                n_requested: rep.n_requested,
                n_reached: rep.n_reached,
                terminated_early: rep.terminated_early,
                max_bound_excess: rep.max_bound_excess(),
            };
            announce(write_atomic(&dir, "convergence.json", &to_json(&meta))?);
            if rep.terminated_early {
                println!("chain stopped early: convergents up to n = {}", rep.n_reached);
            }
            EXIT_OK
        }
        Command::Check => {
            let suite = check_suite(exp, cli.only, exp.config.seed)?;
            announce(write_atomic(&dir, "check.json", &to_json(&suite))?);
            print!("{}", suite.summary());
            if suite.passed {
                EXIT_OK
            } else {
                EXIT_CHECK
            }
        }
        Command::Pencil => {
            let rep = pencil_report(exp)?;
            announce(write_atomic(&dir, "pencil.json", &to_json(&rep))?);
            if rep.passes(exp.config.tolerances.spectrum) {
                EXIT_OK
            } else {
                EXIT_CHECK
            }
        }
        Command::Biorth => {
            let rep = biorth_report(exp)?;
            announce(write_atomic(&dir, "biorth.json", &to_json(&rep))?);
            announce(write_atomic(&dir, "gram.csv", &rep.gram_csv())?);
            if rep.passed {
                EXIT_OK
            } else {
                EXIT_CHECK
            }
        }
        Command::Oracle => write_oracle(exp, &dir)?,
    };
    if cli.oracle && !matches!(cli.command, Command::Oracle | Command::Check) {
        code = code.max(write_oracle(exp, &dir)?);
    }
    Ok(code)
}

/// Parse arguments, run, and return the process exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    let exp = match resolve_config(&cli).and_then(Experiment::new) {
        Ok(x) => x,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    };
    match execute(&cli, &exp) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
