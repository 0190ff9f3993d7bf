use std::fmt;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Pipeline stage a failure is attributed to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Estimate,
    Nuisance,
    Covariance,
    Statistic,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Estimate => "estimate",
            Stage::Nuisance => "nuisance",
            Stage::Covariance => "covariance",
            Stage::Statistic => "statistic",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("matrix is not positive definite (min eigenvalue {min:e}, max eigenvalue {max:e})")]
    NotPositiveDefinite { min: f64, max: f64 },

    #[error("TLS problem has no finite solution (condition number of V22 is {cond:e})")]
    NoFiniteSolution { cond: f64 },

    #[error("TLS minimizer is not unique (singular gap {gap:e} <= {threshold:e})")]
    DegenerateInput { gap: f64, threshold: f64 },

    #[error("test covariance is not positive definite (min eigenvalue {min:e}, max eigenvalue {max:e})")]
    CovarianceNotPd { min: f64, max: f64 },

    #[error("local alternative required but not configured")]
    MissingAlternative,

    #[error("{stage} stage failed: {source}")]
    AtStage {
        stage: Stage,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn at(self, stage: Stage) -> Self {
        Error::AtStage {
            stage,
            source: Box::new(self),
        }
    }

    /// The underlying error with any stage labels stripped.
    pub fn root(&self) -> &Error {
        match self {
            Error::AtStage { source, .. } => source.root(),
            e => e,
        }
    }

    pub fn stage(&self) -> Option<Stage> {
        match self {
            Error::AtStage { stage, .. } => Some(*stage),
            _ => None,
        }
    }
}
