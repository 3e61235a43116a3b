use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("operator is not Hermitian (max deviation {deviation:.3e})")]
    NotHermitian { deviation: f64 },

    #[error("invalid density matrix: {0}")]
    InvalidState(String),

    #[error("target is not a projector: {0}")]
    NotProjector(String),

    #[error("invalid spin quantum number j = {0} (2j must be a positive integer)")]
    InvalidSpin(f64),

    #[error("qubit count must be at least 1")]
    NoQubits,

    #[error("site index {index} out of range for {n} qubits")]
    SiteOutOfRange { index: usize, n: usize },

    #[error("duplicate edge ({0}, {1})")]
    DuplicateEdge(usize, usize),

    #[error("projector {index} does not commute with the operator (norm {norm:.3e})")]
    NonCommuting { index: usize, norm: f64 },

    #[error("decomposition has a single subspace; the gap is undefined")]
    DegenerateDecomposition,

    #[error("invalid decomposition: {0}")]
    InvalidDecomposition(String),

    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),

    #[error("invalid configuration field `{field}`: {reason}")]
    InvalidConfig { field: &'static str, reason: String },

    #[error("numerical breakdown at step {step}: {reason}")]
    NumericalBreakdown { step: usize, reason: String },

    #[error("controller failed at step {step}: {source}")]
    Controller {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("optimizer failed at iteration {iteration}: {source}")]
    Optimizer {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("closed loop failed at horizon {horizon}: {source}")]
    Horizon {
        horizon: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("{aborted} of {total} paths aborted (limit {limit:.1}%)")]
    TooManyAborts {
        aborted: usize,
        total: usize,
        limit: f64,
    },

    #[error("coherent vector left the admissible ball (|x| = {norm:.6}, radius {radius:.6})")]
    BallViolation { norm: f64, radius: f64 },

    #[error("operator has a nonzero trace component ({0:.3e}) and cannot be expanded in the traceless basis")]
    TraceComponent(f64),

    #[error("scenario rollout diverged at optimizer iteration {0}")]
    Diverged(usize),

    #[error("at least {needed} values required, got {got}")]
    TooShort { needed: usize, got: usize },
}
