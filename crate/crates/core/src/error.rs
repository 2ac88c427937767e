use num_complex::Complex64;
use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix is singular: pivot {pivot:e} below floor {floor:e}")]
    SingularMatrix { pivot: f64, floor: f64 },
    #[error("matrix is not Hermitian: asymmetry {asymmetry:e}")]
    NotHermitian { asymmetry: f64 },
    #[error("matrix is not positive definite")]
    NotPositiveDefinite,
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("evaluation point {0} lies on the support interval")]
    PointOnSupport(Complex64),
    #[error("pole {0} lies on the support interval")]
    PoleOnSupport(Complex64),
    #[error("divided difference needs pairwise distinct points")]
    DuplicatePoints,
    #[error("invalid measure: {0}")]
    InvalidMeasure(String),
    #[error("invalid node sequence: {0}")]
    InvalidNodes(String),

    #[error("degenerate step {index}: a1 = {a1}, a2 = {a2} (b^2 = {b2:e})")]
    DegenerateStep { index: usize, a1: f64, a2: f64, b2: f64 },
    #[error("step {index} produced b^2 = {b2:e} < 0; input is not a normalized Markov function")]
    NonpositiveB { index: usize, b2: f64 },
    #[error("step {index}: recurrence coefficient has imaginary residue {residue:e}")]
    NonRealCoefficient { index: usize, residue: f64 },
    #[error("chain already terminated")]
    ChainTerminated,
    #[error("no interpolation node left for step {0}")]
    NoMoreNodes(usize),
    #[error("point {0} collides with an interpolation node")]
    NodeCollision(Complex64),
    #[error("chain too short: need {needed} coefficient records, have {available}")]
    ChainTooShort { needed: usize, available: usize },
    #[error("transfer matrix pole hit at {0}")]
    PoleHit(Complex64),
    #[error("zero denominator in linear fractional transform at {0}")]
    ZeroDenominator(Complex64),
    #[error("{0} is a pole of the convergent")]
    PoleOfConvergent(Complex64),
    #[error("evaluation paths disagree: ratio {ratio}, continued fraction {fraction}")]
    PathDisagreement { ratio: Complex64, fraction: Complex64 },

    #[error("degenerate moment at index {0}")]
    DegenerateMoment(usize),
    #[error("leading coefficient c_{0} vanishes")]
    DegenerateLeading(usize),
    #[error("kappa_0 = kappa_1: the biorthogonal system degenerates")]
    KappaDegenerate,
    #[error("xi_{0} = 1 makes the monic normalization singular")]
    XiUnit(usize),
    #[error("Delta_{0} vanishes")]
    SingularDelta(usize),
    #[error("poles a_{0} and b_{0} coincide")]
    EqualPoles(usize),
    #[error("invariant violated: {0}")]
    InvariantViolated(String),
    #[error("invalid recurrence data: {0}")]
    InvalidData(String),

    #[error("interpolation system is rank deficient (singular value ratios {gap:e}, {next:e})")]
    RankDeficient { gap: f64, next: f64 },
    #[error("interpolant is not in the normal case: {0}")]
    NormalCaseViolation(String),

    #[error("configuration error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
