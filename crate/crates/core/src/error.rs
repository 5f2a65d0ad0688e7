use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("requested {requested} modes but only {available} discrete modes are available")]
    TooManyModes { requested: usize, available: usize },

    #[error("1/h = {inverse} is not a positive integer")]
    NonIntegerMeshSize { inverse: f64 },

    #[error("point lies outside the triangle (barycentric weight {weight})")]
    PointOutsideTriangle { weight: f64 },

    #[error("element {element} is degenerate (measure {measure})")]
    DegenerateElement { element: usize, measure: f64 },

    #[error("coefficient k = {value} is not positive at element {element}")]
    NonPositiveCoefficient { element: usize, value: f64 },

    #[error("linear solve failed on level {level}, sample {sample}: {reason}")]
    SolverFailure { level: usize, sample: u64, reason: String },

    #[error("matrix is not positive definite (pivot {pivot} at row {row})")]
    NotPositiveDefinite { row: usize, pivot: f64 },

    #[error("level mismatch: expected level {expected}, found level {found}")]
    LevelMismatch { expected: usize, found: usize },

    #[error("levels {coarse} and {fine} are not nested")]
    NotNested { coarse: usize, fine: usize },

    #[error("need at least {needed} samples, got {got}")]
    InsufficientSamples { needed: usize, got: usize },

    #[error("target error {eps} is infeasible: discretization floor is {floor} (eps~ = {eps_tilde})")]
    InfeasibleTarget { eps: f64, eps_tilde: f64, floor: f64 },

    #[error("precondition violated: {0}")]
    Precondition(String),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter { name, reason: reason.into() }
    }
}
