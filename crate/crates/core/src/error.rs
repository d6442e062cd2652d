use std::fmt;

use thiserror::Error;

/// A single data-quality problem found while validating a frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub column: &'static str,
    pub index: usize,
    pub kind: ViolationKind,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ViolationKind {
    OutOfRange { value: f64, lo: f64, hi: f64 },
    NonBinary { value: f64 },
    Gap { len: usize },
    NotFinite,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            ViolationKind::OutOfRange { value, lo, hi } => write!(
                f,
                "{}[{}] = {} outside [{}, {}]",
                self.column, self.index, value, lo, hi
            ),
            ViolationKind::NonBinary { value } => {
                write!(f, "{}[{}] = {} is not 0 or 1", self.column, self.index, value)
            }
            ViolationKind::Gap { len } => write!(
                f,
                "{}: {} consecutive missing values starting at {}",
                self.column, len, self.index
            ),
            ViolationKind::NotFinite => write!(f, "{}[{}] is not finite", self.column, self.index),
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("length mismatch: {what} (expected {expected}, got {actual})")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("validation failed: {}", join(.0))]
    Validation(Vec<Violation>),

    #[error("insufficient history: need {need} steps, have {have}")]
    InsufficientHistory { need: usize, have: usize },

    #[error("invalid lag order {0}; must be >= 1")]
    InvalidLag(usize),

    #[error("missing causal model for edge {source_var} -> {target}")]
    MissingEdge {
        source_var: &'static str,
        target: &'static str,
    },

    #[error("invalid plan constraints: {0}")]
    InvalidConstraints(String),

    #[error("invalid time axis: {0}")]
    InvalidAxis(String),

    #[error("schema error: {0}")]
    Schema(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("model format error: {0}")]
    Format(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn join(v: &[Violation]) -> String {
    v.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
        match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::Io(io),
            other => Error::Parse {
                line,
                msg: format!("{other:?}"),
            },
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
