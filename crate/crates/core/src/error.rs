use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("point {point:?} lies outside the {region}")]
    OutsideDomain { point: Vec<f64>, region: String },

    #[error("diagonal value is singular in dimension n = {0}")]
    SingularDiagonal(usize),

    #[error("grid too coarse: only {interior} interior nodes (need at least {required})")]
    GridTooCoarse { interior: usize, required: usize },

    #[error("grid too large: {nodes} nodes exceeds the limit of {limit}")]
    GridTooLarge { nodes: usize, limit: usize },

    #[error("interior node ({i}, {j}) has no interior neighbours; the 13-point stencil has no support")]
    IsolatedNode { i: usize, j: usize },

    #[error("nearest-point iteration did not converge for {point:?} (best residual {residual:e})")]
    NearestPointFailed { point: [f64; 2], residual: f64 },

    #[error(
        "linear solve did not reach tolerance {tol:e}: relative residual {residual:e} after {iterations} iterations"
    )]
    SolveDidNotConverge { tol: f64, residual: f64, iterations: usize },

    #[error("factorization failed: {0}")]
    Factorization(String),

    #[error("sampling failed: {0}")]
    Sampling(String),

    #[error("boundary data violated: {0}")]
    BoundaryData(String),
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
