use thiserror::Error;

use crate::balance::SupportDiagnosis;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("domain error: {0}")]
    Domain(String),

    /// Jacobi sweeps ran out before the off-diagonal norm met the tolerance.
    #[error("eigensolver did not converge after {sweeps} sweeps (off-diagonal norm {off_norm:.3e})")]
    IterationLimit {
        sweeps: usize,
        off_norm: f64,
        best_eigenvalues: Vec<f64>,
    },

    /// Balancing hit `max_iter` with the residual still above tolerance.
    #[error("Sinkhorn-Knopp did not converge in {iterations} iterations (residual {residual:.3e})")]
    NonConvergence {
        iterations: usize,
        residual: f64,
        residual_history: Vec<f64>,
    },

    #[error(
        "matrix lacks total support: irreducible={}, positive_diagonal={}",
        .0.irreducible,
        .0.positive_diagonal
    )]
    Support(SupportDiagnosis),

    #[error("singular system: pivot {pivot:.3e} at column {column}")]
    Singular { pivot: f64, column: usize },

    #[error("degenerate partition: k={k} but only {distinct} distinct values ({detail})")]
    DegeneratePartition {
        k: usize,
        distinct: usize,
        detail: String,
    },

    #[error("{0}")]
    Exhaustion(String),

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    /// A pipeline stage failed; `source` is the underlying error.
    #[error("{stage} stage failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// The innermost error, looking through stage wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            other => other,
        }
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
        if expected == found {
            Ok(())
        } else {
            Err(Error::DimensionMismatch { expected, found })
        }
    }
}
