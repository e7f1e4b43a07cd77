use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("triangle {triangle} is degenerate: {reason}")]
    DegenerateTriangle { triangle: usize, reason: String },

    #[error("triangle {triangle} references vertex {index} but the mesh has {vertex_count} vertices")]
    IndexOutOfRange {
        triangle: usize,
        index: usize,
        vertex_count: usize,
    },

    #[error("vertex {0} belongs to no triangle")]
    IsolatedVertex(usize),

    #[error("mesh has no triangles")]
    EmptyMesh,

    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("input contains NaN")]
    NaNInput,

    #[error("value {value} at index {index} lies outside [0, 1]")]
    ValueOutOfRange { index: usize, value: f64 },

    #[error("unsupported channel count {0}; expected 1 or 3")]
    InvalidChannels(usize),

    #[error("index {0} is in the support but its residual is zero")]
    ZeroResidualInSupport(usize),

    #[error("exponent p = {0} admits no lower bound of this form; need 0 < p < 1")]
    InvalidP(f64),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("non-finite value encountered in {0}")]
    NonFiniteIterate(&'static str),

    #[error("conjugate gradient stopped after {iterations} iterations at relative residual {residual:e}")]
    IterationLimitExceeded { iterations: usize, residual: f64 },

    #[error("normal-equation matrix is singular or not positive definite")]
    SingularSystem,

    #[error("{stage} failed for {row}: {source}")]
    Stage {
        stage: &'static str,
        row: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn in_stage(self, stage: &'static str, row: impl Into<String>) -> Self {
        Error::Stage {
            stage,
            row: row.into(),
            source: Box::new(self),
        }
    }
}

pub(crate) fn check_len(context: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            context,
            expected,
            found,
        })
    }
}
