use std::path::PathBuf;

use crate::model::NliLabel;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Schema {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("duplicate {kind} id {id:?}")]
    DuplicateId { kind: &'static str, id: String },

    #[error("no fixture entry for checker {checker_id:?}, claim {claim_id:?}")]
    MissingFixture { checker_id: String, claim_id: String },

    #[error("transport error after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },

    #[error("every checker has F1 = 0 for class {0}")]
    DegenerateClass(NliLabel),

    #[error("checker set mismatch for claim {claim_id:?}: {message}")]
    CheckerSetMismatch { claim_id: String, message: String },

    #[error("embedding dimension mismatch: {message}")]
    DimensionMismatch { message: String },

    #[error("{path}:{line}: unknown {kind} {name:?}")]
    UnknownVocab {
        path: PathBuf,
        line: usize,
        kind: &'static str,
        name: String,
    },

    #[error("min-max calibrator used before fitting")]
    UnfittedCalibrator,

    #[error("no claims to score")]
    EmptyClaims,

    #[error("no passages to score")]
    EmptyPassages,

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("length mismatch: {left} predictions vs {right} gold labels")]
    LengthMismatch { left: usize, right: usize },

    #[error("development set is empty")]
    EmptyDev,

    #[error("development claim {0:?} has no gold label")]
    NoGoldLabels(String),

    #[error("no KG-aligned claims in sweep input")]
    NoAlignedClaims,

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("checker outputs failed validation ({count} violation(s)); first: {first}")]
    Validation { count: usize, first: String },

    #[error("output directory {0} already contains reports; pass --force to overwrite")]
    OutputExists(PathBuf),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn schema(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Schema {
            path: path.into(),
            line,
            message: message.into(),
        }
    }
}
