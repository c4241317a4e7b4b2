use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid value for `{field}`: {reason}")]
    InvalidParam { field: &'static str, reason: String },

    #[error("ensemble must contain at least one member")]
    EmptyEnsemble,

    #[error("trajectory {member} diverged at kick {kick}: |p| = {value:e} exceeds bound {bound:e}")]
    Divergence {
        member: usize,
        kick: u64,
        value: f64,
        bound: f64,
    },

    #[error(
        "grid too small: probability {mass:e} in the outer momentum band after kick {kick} \
         (limit {limit:e}, grid {n1}x{n2})"
    )]
    EdgeMass {
        kick: u64,
        mass: f64,
        limit: f64,
        n1: usize,
        n2: usize,
    },

    #[error("invalid momentum grid {n1}x{n2}: sizes must be even and at least 8")]
    InvalidGrid { n1: usize, n2: usize },

    #[error("cannot fit transport exponent: {0}")]
    Fit(String),

    #[error("linear algebra failure: {0}")]
    Linalg(String),

    #[error("config error at `{path}`: {msg}")]
    Config { path: String, msg: String },

    #[error("unknown config keys: {}", .0.join(", "))]
    UnknownKeys(Vec<String>),

    #[error("refusing to overwrite completed output {0}")]
    OutputExists(PathBuf),

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParam {
            field,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }

    /// Short machine-readable tag used in error records.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidParam { .. } => "invalid_param",
            Error::EmptyEnsemble => "empty_ensemble",
            Error::Divergence { .. } => "divergence",
            Error::EdgeMass { .. } => "edge_mass",
            Error::InvalidGrid { .. } => "invalid_grid",
            Error::Fit(_) => "fit",
            Error::Linalg(_) => "linalg",
            Error::Config { .. } => "config",
            Error::UnknownKeys(_) => "unknown_keys",
            Error::OutputExists(_) => "output_exists",
            Error::Io { .. } => "io",
            Error::Json(_) => "json",
        }
    }
}
