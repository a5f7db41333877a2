use thiserror::Error;

/// Errors produced by the analysis routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Input violates a structural invariant (asymmetric matrix, self-loop, ...).
    #[error("validation failed: {0}")]
    Validation(String),

    /// Input is well-formed but outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// The reduced theory only covers rank-one constraints.
    #[error("unsupported constraint rank {rank} for agent {agent} (reduced model requires rank one)")]
    UnsupportedRank { agent: usize, rank: usize },

    #[error("degenerate threshold: alpha + lambda * gamma = {0:e}")]
    DegenerateThreshold(f64),

    #[error("eigenvalue {value} is not simple (relative gap {gap:e})")]
    NonSimpleEigenvalue { value: f64, gap: f64 },

    #[error("hypothesis violated: {0}")]
    Hypothesis(String),

    /// Components are listed with 1-based node indices.
    #[error("effective network is disconnected into components {components:?}")]
    Disconnected { components: Vec<Vec<usize>> },

    #[error("state diverged at t = {time}")]
    Divergence { time: f64 },

    #[error("numerical failure: {0}")]
    Numeric(String),
}

impl Error {
    /// True for failures of a numerical procedure, as opposed to bad input.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::Divergence { .. } | Error::Numeric(_) | Error::NonSimpleEigenvalue { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
