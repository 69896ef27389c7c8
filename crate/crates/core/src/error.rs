use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("graph is not connected")]
    Disconnected,

    /// A random construction kept failing its acceptance test.
    #[error("retry budget of {attempts} exhausted: {what}")]
    RetriesExhausted { attempts: usize, what: String },

    #[error("infeasible request: {0}")]
    Infeasible(String),

    /// Iterates blew up; usually a step size that is too large.
    #[error("numerical divergence{}: iterate norm {norm:e}", round.map(|r| format!(" at round {r}")).unwrap_or_default())]
    Divergence { round: Option<usize>, norm: f64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// Attaches a round index to a divergence error that does not have one yet.
    pub fn at_round(self, r: usize) -> Self {
        match self {
            Error::Divergence { round: None, norm } => Error::Divergence { round: Some(r), norm },
            other => other,
        }
    }
}
