use thiserror::Error;

/// Errors raised by the numerical routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("squared speed Q = {q} is outside the admissible range [0, {limit})")]
    Domain { q: f64, limit: f64 },

    #[error("invalid `{name}`: {constraint}")]
    InvalidParameter { name: String, constraint: String },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("nearest-point projection is undefined at |y| = {0:e}")]
    DegenerateProjection(f64),

    #[error("expected a unit vector, norm deviates from 1 by {0:e}")]
    NonUnit(f64),

    #[error("near-sonic flow (F = {froude}); the small-elevation bore model does not apply")]
    NearSonic { froude: f64 },

    #[error("no admissible bore root in [{lo}, {hi}]; cubic roots (re, im): {roots:?}")]
    NoAdmissibleRoot {
        lo: f64,
        hi: f64,
        roots: Vec<(f64, f64)>,
    },

    #[error("finite-difference step shrank below {0:e} while probing the energy")]
    StepUnderflow(f64),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn invalid(name: impl Into<String>, constraint: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name: name.into(),
            constraint: constraint.into(),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
