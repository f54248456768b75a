use std::path::PathBuf;

use crate::model::OperatingPoint;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("insufficient data: need at least {needed}, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("degenerate grid: {0}")]
    DegenerateGrid(String),

    #[error("solver did not converge after {iterations} iterations (relative gradient {gradient:e})")]
    NonConvergence { iterations: usize, gradient: f64 },

    #[error("design matrix is rank deficient (condition estimate {condition:e})")]
    RankDeficient { condition: f64 },

    #[error("frame is empty")]
    EmptyFrame,

    #[error("frame is identically zero")]
    ZeroFrame,

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("missing grid cell at {0}")]
    MissingGridCell(OperatingPoint),

    #[error("at {op}: {source}")]
    AtOperatingPoint {
        op: OperatingPoint,
        #[source]
        source: Box<Error>,
    },

    #[error("unsupported {what} version {found} (supported: {supported})")]
    UnsupportedVersion {
        what: &'static str,
        found: u32,
        supported: u32,
    },

    #[error("parse error in {context}: {message}")]
    Parse { context: String, message: String },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn at(op: OperatingPoint, source: Error) -> Self {
        Error::AtOperatingPoint {
            op,
            source: Box::new(source),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(context: impl Into<String>, message: impl ToString) -> Self {
        Error::Parse {
            context: context.into(),
            message: message.to_string(),
        }
    }

    /// Operating point attached to this error, if any.
    pub fn operating_point(&self) -> Option<OperatingPoint> {
        match self {
            Error::AtOperatingPoint { op, .. } | Error::MissingGridCell(op) => Some(*op),
            _ => None,
        }
    }
}
