use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("mesh level {level} exceeds the configured maximum {max}")]
    ResourceExhausted { level: u32, max: u32 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("depth {depth:e} m at {entity} {index} is at or below the degeneracy threshold {threshold:e} m")]
    DegenerateDepth {
        entity: &'static str,
        index: usize,
        depth: f64,
        threshold: f64,
    },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("blow-up at step {step}: {reason}")]
    BlowUp { step: usize, reason: String },

    #[error("step {step}: {source}")]
    AtStep {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("balance quadrature did not converge ({0})")]
    QuadratureFailure(String),

    #[error("unknown preset `{0}` (expected no_diff, cd or bd)")]
    UnknownPreset(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("parse error in {path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("invalid configuration:\n  {}", .0.join("\n  "))]
    Validation(Vec<String>),

    #[error("all {0} ensemble members failed")]
    EnsembleFailed(usize),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn at_step(self, step: usize) -> Self {
        match self {
            e @ (Error::BlowUp { .. } | Error::AtStep { .. }) => e,
            e => Error::AtStep {
                step,
                source: Box::new(e),
            },
        }
    }
}
