use thiserror::Error;

/// Errors raised by the estimation and stabilisation routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("vertex {vertex} out of range 1..={m}")]
    VertexOutOfRange { vertex: usize, m: usize },

    #[error("self-loop at vertex {0}")]
    SelfLoop(usize),

    #[error("duplicate edge {0} -> {1}")]
    DuplicateEdge(usize, usize),

    #[error("graph contains a directed cycle through vertex {0}")]
    Cycle(usize),

    #[error("graph must have at least one vertex")]
    EmptyGraph,

    #[error("regime table only applies to transitive DAGs")]
    NotTransitive,

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite entry in {0}")]
    NonFinite(&'static str),

    #[error("sample has n = {n} rows but m = {m} columns; duplicate rows until n >= m first")]
    TooFewSamples { n: usize, m: usize },

    #[error("invalid perturbation: {0}")]
    InvalidPerturbation(String),

    #[error("malformed collineation lift: {0}")]
    MalformedLift(String),

    #[error("pencil precondition violated: {0}")]
    Pencil(String),

    #[error("covariance matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("omega estimate missing at vertex {0}")]
    MissingOmega(usize),

    #[error("stabilised sample has rank {rank}, expected {m}")]
    RankDeficientStabilisation { rank: usize, m: usize },

    #[error("epsilon must be nonzero")]
    ZeroEpsilon,

    #[error("epsilon grid must be a strictly decreasing sequence of positive numbers")]
    BadEpsilonGrid,

    #[error("graph is not star-shaped")]
    NotStar,

    #[error("maximum likelihood estimate does not exist (vertex {0})")]
    MleDoesNotExist(usize),

    #[error("lambda entry ({0}, {1}) is not on an edge {1} -> {0}")]
    LambdaOffEdge(usize, usize),

    #[error("candidate alpha is not an MLE given the sample: {0}")]
    NotAnMle(String),
}

pub type Result<T> = std::result::Result<T, Error>;
