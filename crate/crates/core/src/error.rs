use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("division by an expression that normalizes to zero")]
    DegenerateDivision,

    #[error("denominator {value:e} is too close to zero")]
    NearSingular { value: f64 },

    #[error("no numeric value bound for atom `{0}`")]
    MissingBinding(String),

    #[error("binding for `{bound}` leaves derivative atom `{unbound}` unbound; use bind_function")]
    UnboundDerivative { bound: String, unbound: String },

    #[error("binding for `{0}` refers to the atom it replaces")]
    RecursiveBinding(String),

    #[error("syntax error at {line}:{column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("unknown derivative notation at {line}:{column}: {message}")]
    UnknownDerivative {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("duplicate coordinate `{0}`")]
    DuplicateCoordinate(String),

    #[error("jet order {order} of `{symbol}` exceeds the tracked maximum {max}")]
    OrderLimit { symbol: String, order: u32, max: u32 },

    #[error("invalid binding: {0}")]
    InvalidBinding(String),

    #[error("coordinate mismatch: {0}")]
    CoordinateMismatch(String),

    #[error("transform is singular: {0}")]
    SingularTransform(String),

    #[error("not an equivalence transformation; obstructions: {0}")]
    Obstruction(String),

    #[error("bracket of basis elements {0} and {1} leaves the span")]
    ClosureViolation(usize, usize),

    #[error("basis has rank {rank} but {dim} elements")]
    Rank { rank: usize, dim: usize },

    #[error("structure constants violate the Jacobi identity at ({0}, {1}, {2})")]
    JacobiViolation(usize, usize, usize),

    #[error("rank is unstable across trials: {0:?}")]
    UnstableRank(Vec<usize>),

    #[error("trajectory escaped to infinity near t = {t}")]
    FiniteTimeEscape { t: f64 },

    #[error("step-halving error estimate {estimate:e} exceeds tolerance {tolerance:e}")]
    ToleranceExceeded { estimate: f64, tolerance: f64 },

    #[error("invalid input: {0}")]
    Invalid(String),
}
