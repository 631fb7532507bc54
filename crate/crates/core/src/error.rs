use thiserror::Error;

/// Errors produced by graph construction, spectral computation, and the
/// control/observability pipelines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("edge weight is not symmetric between `{u}` and `{v}` ({forward} vs {backward})")]
    NonSymmetricWeight {
        u: String,
        v: String,
        forward: f64,
        backward: f64,
    },

    #[error("vertex `{0}` has non-positive measure {1}")]
    NonPositiveMeasure(String, f64),

    #[error("self-loop at vertex `{0}`")]
    SelfLoop(String),

    #[error("duplicate edge between `{0}` and `{1}`")]
    DuplicateEdge(String, String),

    #[error("duplicate vertex id `{0}`")]
    DuplicateVertex(String),

    #[error("unknown vertex `{0}`")]
    UnknownVertex(String),

    #[error("weight {value} for {what} is not a finite non-negative real")]
    InvalidWeight { what: String, value: f64 },

    #[error("vertex subset is empty")]
    EmptySubset,

    #[error("vertex subset is the whole vertex set")]
    FullSubset,

    #[error("inradius is unbounded: the complement of the region is empty or unreachable")]
    UnboundedInradius,

    #[error("base graph is not a cycle")]
    NotACycle,

    #[error("invalid fold number {0}")]
    InvalidFold(usize),

    #[error("no vertex of the fiber lies in the enlarged set")]
    EmptyFiberIntersection,

    #[error("symmetric eigensolver failed: {0}")]
    EigensolveFailure(String),

    #[error("negative time {0}")]
    NegativeTime(f64),

    #[error("quadrature did not converge on [{a}, {b}]")]
    QuadratureNonConvergence { a: f64, b: f64 },

    #[error("set is not relatively dense (covering radius is infinite)")]
    NotRelativelyDense,

    #[error("target contraction {target} is below the unreachable floor {floor}")]
    TargetUnreachable { target: f64, floor: f64 },

    #[error("Gramian eigenvalue ratio {ratio:e} is below double-precision resolution")]
    IllConditionedGramian { ratio: f64 },

    #[error("bisection on the Lagrange multiplier did not converge")]
    BisectionNonConvergence,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid parameter: {0}")]
    InvalidParams(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}
