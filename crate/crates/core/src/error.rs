use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GbvError {
    #[error("order must be at least 1, got {0}")]
    InvalidOrder(usize),

    #[error("order mismatch: expected {expected}, got {found}")]
    OrderMismatch { expected: usize, found: usize },

    #[error("derivative order {d} is outside [0, {max}]")]
    DerivativeOutOfRange { d: usize, max: usize },

    #[error("invalid measure: {0}")]
    InvalidMeasure(String),

    #[error("invalid spline: {0}")]
    InvalidSpline(String),

    #[error("invalid interval: {0}")]
    InvalidInterval(String),

    #[error("invalid test function: {0}")]
    InvalidTestFunction(String),

    #[error("invalid measurement: {0}")]
    InvalidMeasurement(String),

    #[error("invalid problem: {0}")]
    InvalidProblem(String),

    #[error("measure has density pieces; only atomic measures can be inverted")]
    NonAtomicMeasure,

    #[error("atom at {0} lies outside the system interval")]
    AtomOutsideInterval(f64),

    #[error("interpolation constraints are infeasible")]
    Infeasible,

    #[error("solver did not converge within {0} iterations")]
    NoConvergence(usize),

    #[error("problem is ill-posed: {0}")]
    IllPosed(String),

    #[error("exact knot reduction needs every term at derivative order N-1; supply a grid")]
    MixedOrder,

    #[error("candidate grid too large: {0} knots")]
    GridTooLarge(usize),

    #[error("scale guard exceeded: {0}")]
    ScaleGuard(String),
}

pub type Result<T> = std::result::Result<T, GbvError>;
