use std::path::PathBuf;

use thiserror::Error;

use crate::equilibria::Equilibrium;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// The instance cannot produce a finite SINR matrix (single station, no noise).
    #[error("degenerate instance: {0}")]
    DegenerateInstance(String),

    #[error("marginal totals differ: supply {supply} vs demand {demand}")]
    InfeasibleMarginals { supply: f64, demand: f64 },

    /// The constraint set is empty (equality supply with too little total demand).
    #[error("provably infeasible problem: {0}")]
    Infeasible(String),

    /// The zero-fixing projection loop emptied the support.
    #[error("degenerate projection: no coordinate survives the zero-fixing loop")]
    DegenerateProjection,

    #[error("solver did not converge after {iterations} iterations (kkt residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64, best: Option<Box<Equilibrium>> },

    /// A solver failure tagged with the seed of the instance that produced it.
    #[error("instance seed {seed}: {source}")]
    Instance {
        seed: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("config error at `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("malformed input: {0}")]
    Format(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// Strips any [`Error::Instance`] wrapping.
    pub fn root(&self) -> &Error {
        match self {
            Error::Instance { source, .. } => source.root(),
            other => other,
        }
    }
}
