use std::path::PathBuf;

use crate::spectral::AssumptionReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("shape mismatch in {context}: expected {expected}, found {found}")]
    Shape {
        context: &'static str,
        expected: String,
        found: String,
    },

    #[error("{what} is not a probability distribution: {detail}")]
    NotStochastic { what: String, detail: String },

    #[error("non-finite value in {what} at index {index}")]
    NonFinite { what: &'static str, index: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("no convergence after {iterations} iterations (last change {last_change:e})")]
    NonConvergence { iterations: u64, last_change: f64 },

    #[error("linear system is numerically singular (reciprocal condition estimate {rcond:e})")]
    Singular { rcond: f64 },

    #[error("eigensolver failed to converge (condition estimate {condition:e})")]
    Eigensolver { condition: f64 },

    #[error("eigenbasis unusable: {}", .0.summary())]
    NotDiagonalizable(Box<AssumptionReport>),

    #[error("imaginary residue {residue:e} in a trajectory that must be real")]
    ImaginaryResidue { residue: f64 },

    #[error("horizon {given} too short: gamma^h <= 1e-10 needs at least {minimum}")]
    HorizonTooShort { given: usize, minimum: usize },

    #[error("unknown environment `{0}` (expected frozenlake4x4, cliffwalking or random:<n_s>x<n_a>:<seed>)")]
    UnknownEnv(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn shape(context: &'static str, expected: impl ToString, found: impl ToString) -> Self {
        Error::Shape {
            context,
            expected: expected.to_string(),
            found: found.to_string(),
        }
    }

    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
