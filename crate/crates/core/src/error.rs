use thiserror::Error;

/// Errors raised by the flowlab numerical routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum FlowError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid nest {dims:?} for dimension {dim}: {reason}")]
    InvalidNest {
        dim: usize,
        dims: Vec<usize>,
        reason: &'static str,
    },

    #[error("element has non-finite entries")]
    NonFinite,

    #[error("matrix exponential overflow: generator Frobenius norm {0} exceeds 700")]
    ExpOverflow(f64),

    #[error("time {t} outside tabulated range [{lo}, {hi}]")]
    OutOfRange { t: f64, lo: f64, hi: f64 },

    #[error("empty time grid")]
    EmptyGrid,

    #[error("finite-difference step too small: refinement raised the residual from {coarse:e} to {fine:e}")]
    StepTooSmall { coarse: f64, fine: f64 },

    #[error("Dyson partial sums diverged at order {order}: norm {norm:e} exceeds {limit:e}")]
    DysonDivergence { order: usize, norm: f64, limit: f64 },

    #[error("singular element: smallest singular value {0:e}")]
    Singular(f64),

    #[error("similarity not unique: null space has dimension {0}")]
    AmbiguousSimilarity(usize),

    #[error("not an automorphism of the algebra: {0}")]
    NotAutomorphism(String),

    #[error("not a derivation of the algebra: {0}")]
    NotDerivation(String),

    #[error("derivation is not inner within the algebra: residual {0:e}")]
    NotInnerDerivation(f64),

    #[error("operation requires an inner flow")]
    RequiresInnerFlow,

    #[error("integrand growth {xi} exceeds sqrt(n) = {sqrt_n}")]
    GrowthAlarm { xi: f64, sqrt_n: f64 },

    #[error("mollified similarity is singular (smallest singular value {0:e}); increase n")]
    IncreaseN(f64),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("matrix literal: {0}")]
    Literal(String),
}

pub type Result<T> = std::result::Result<T, FlowError>;
