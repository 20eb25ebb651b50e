use thiserror::Error;

use crate::collapsesim::SimError;
use crate::dpcriterion::CriterionError;
use crate::massdist::MassError;
use crate::quantities::QuantityError;
use crate::snsolver::SnError;

/// Schema or value problem in a run manifest, located by a dotted path such
/// as `command.branch_a.mass`.
#[derive(Debug, Error, Clone, PartialEq)]
#[error("manifest error at `{path}`: {message}")]
pub struct ManifestError {
    pub path: String,
    pub message: String,
}

impl ManifestError {
    pub fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        ManifestError { path: path.into(), message: message.into() }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error(transparent)]
    Quantity(#[from] QuantityError),
    #[error(transparent)]
    Mass(#[from] MassError),
    #[error(transparent)]
    Criterion(#[from] CriterionError),
    #[error(transparent)]
    Sn(#[from] SnError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Manifest(#[from] ManifestError),
    #[error("usage error: {0}")]
    Usage(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl Error {
    /// 1 for computational failures, 2 for usage and validation errors.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Mass(e) | Error::Criterion(CriterionError::Mass(e)) => mass_exit_code(e),
            Error::Criterion(CriterionError::InvalidPrefactor(_)) => 2,
            Error::Sim(SimError::Criterion(CriterionError::Mass(e))) => mass_exit_code(e),
            Error::Sim(_) => 2,
            Error::Sn(e) => match e {
                SnError::Convergence { .. } | SnError::NumericalBlowup { .. } | SnError::Io(_) => 1,
                _ => 2,
            },
            Error::Quantity(_) | Error::Manifest(_) | Error::Usage(_) => 2,
            Error::Io(_) => 1,
        }
    }
}

fn mass_exit_code(e: &MassError) -> i32 {
    match e {
        MassError::DivergentSelfEnergy(_) | MassError::Quadrature { .. } | MassError::Io(_) => 1,
        _ => 2,
    }
}
