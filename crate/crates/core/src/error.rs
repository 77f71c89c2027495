use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("numerically singular matrix in {context} (pivot/eigenvalue {value:e})")]
    Singular { context: &'static str, value: f64 },

    #[error("information matrix is singular: target components {r} and {s} are both (near-)Gaussian")]
    Identifiability { r: usize, s: usize },

    #[error("insufficient data: n = {n}, need at least {need}")]
    InsufficientData { n: usize, need: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: String, found: String },

    #[error("rank statistic T[{r},{s}] = {value:e} is degenerate")]
    DegenerateStatistic { r: usize, s: usize, value: f64 },

    #[error("degenerate cross-information pair ({r},{s}): determinant {value:e}")]
    DegeneratePair { r: usize, s: usize, value: f64 },

    #[error("FastICA did not converge for component {component} after restarts")]
    NonConvergence { component: usize },

    #[error("supplied estimate violates the null constraint (residual {0:e})")]
    ConstraintViolation(f64),

    #[error("Omega is rank deficient: rank {rank} < {cols} columns")]
    RankDeficient { rank: usize, cols: usize },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("campaign aborted: {failed} of {total} estimator runs failed")]
    TooManyFailures { failed: usize, total: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
