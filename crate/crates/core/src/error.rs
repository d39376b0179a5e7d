use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("degree mismatch: {left} vs {right}")]
    DegreeMismatch { left: usize, right: usize },
    #[error("invalid index set: {0}")]
    InvalidIndexSet(String),
    #[error("interior product of a degree-0 form")]
    InteriorOfScalar,
    #[error("metric is not symmetric positive definite")]
    NotPositiveDefinite,
    #[error("automorphism is not hyperbolic: eigenvalue modulus {modulus} too close to 1")]
    NotHyperbolic { modulus: f64 },
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("only the constant roof 1 is supported, got {0}")]
    UnsupportedRoof(f64),
    #[error("integer overflow while computing {0}")]
    IntegerOverflow(&'static str),
    #[error("constants not exponential: fit r^2 = {r2:.6}")]
    NotExponential { r2: f64 },
    #[error("invalid form atom: {0}")]
    InvalidAtom(String),
    #[error("operation `{0}` requires an analytic atom field")]
    NeedsAtoms(&'static str),
    #[error("tangent vectors are not based at the evaluation point")]
    BasePointMismatch,
    #[error("degenerate parallelepiped: zero volume at t = 0")]
    DegenerateSides,
    #[error("asymmetry is only defined for manifold dimension n >= 4 (got n = {0})")]
    DimensionTooSmall(usize),
    #[error("degree {degree} refused: {reason}")]
    DegreeRefused { degree: usize, reason: &'static str },
    #[error("contraction rate unavailable or non-positive (nu = {0}); convergence not guaranteed")]
    NoContraction(f64),
    #[error("procedural field failed the gluing check (residual {residual:e})")]
    GluingFailed { residual: f64 },
    #[error("start point is not periodic: return distance {distance:e}")]
    NotPeriodic { distance: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
}
