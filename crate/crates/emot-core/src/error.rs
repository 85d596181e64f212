use alloc::string::String;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("empty measure")]
    EmptyMeasure,
    #[error("invalid measure: {0}")]
    InvalidMeasure(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("mass mismatch: {0} vs {1}")]
    MassMismatch(f64, f64),
    #[error("mean mismatch: {0} vs {1}")]
    MeanMismatch(f64, f64),
    #[error("marginals are not in convex order (witness {witness:?})")]
    NotInConvexOrder { witness: Option<f64> },
    #[error("linear program is infeasible")]
    Infeasible,
    #[error("linear program is unbounded")]
    Unbounded,
    #[error("simplex iteration limit reached")]
    IterationLimit,
    #[error("vertex enumeration guard exceeded: {0} variables after presolve")]
    TooManyVariables(usize),
    #[error("vertex enumeration found more than {0} vertices")]
    TooManyVertices(usize),
    #[error("decomposition mismatch: {0}")]
    Decomposition(String),
    #[error("gradient oracle disagrees with finite differences: analytic {analytic}, numeric {numeric}")]
    GradientCheck { analytic: f64, numeric: f64 },
    #[error("rearrangement cost {cost} exceeds 2*W1 = {bound}")]
    RearrangementBound { cost: f64, bound: f64 },
    #[error("approximation stage `{stage}` failed: {message}")]
    Approximation { stage: &'static str, message: String },
}

pub type Result<T> = core::result::Result<T, Error>;
