use thiserror::Error;

use crate::bound::BoundReport;

/// Errors raised by the diagnostics toolkit.
///
/// Every variant carries a stable kebab-case code (see [`Error::code`]) that is
/// surfaced verbatim in CLI diagnostics and JSON reports.
#[derive(Debug, Error)]
pub enum Error {
    #[error("empty sample set")]
    EmptySample,

    #[error("invalid joint model: {0}")]
    InvalidJoint(String),

    #[error("outcome spaces do not match: {0}")]
    SpaceMismatch(String),

    #[error("invalid probability mass function: {0}")]
    InvalidPmf(String),

    #[error("duplicate label `{0}`")]
    DuplicateLabel(String),

    #[error("unknown dialogue `{0}`")]
    UnknownDialogue(String),

    #[error("invalid embedding for `{id}`: {reason}")]
    InvalidEmbedding { id: String, reason: String },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },

    #[error("dialogue `{0}` has no tokens")]
    EmptyDialogue(String),

    #[error("test function `{0}` requires a reference dialogue in the noise value")]
    MissingReference(String),

    #[error("no score for dialogue `{dialogue}` under noise `{noise}` in table `{table}`")]
    MissingScore {
        table: String,
        dialogue: String,
        noise: String,
    },

    #[error("no valid pairs: every item was skipped ({skipped} skipped)")]
    NoValidPairs { skipped: usize },

    #[error("test sets differ: {0}")]
    TestMismatch(String),

    #[error("adaptation bound violated: td_target={} > rhs={}", .0.td_target, .0.rhs)]
    BoundViolated(Box<BoundReport>),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn code(&self) -> &'static str {
        match self {
            Error::EmptySample => "empty-sample",
            Error::InvalidJoint(_) => "invalid-joint",
            Error::SpaceMismatch(_) => "space-mismatch",
            Error::InvalidPmf(_) => "invalid-pmf",
            Error::DuplicateLabel(_) => "duplicate-label",
            Error::UnknownDialogue(_) => "unknown-dialogue",
            Error::InvalidEmbedding { .. } => "invalid-embedding",
            Error::DimMismatch { .. } => "dim-mismatch",
            Error::EmptyDialogue(_) => "empty-dialogue",
            Error::MissingReference(_) => "missing-reference",
            Error::MissingScore { .. } => "missing-score",
            Error::NoValidPairs { .. } => "no-valid-pairs",
            Error::TestMismatch(_) => "test-mismatch",
            Error::BoundViolated(_) => "bound-violated",
            Error::InvalidParameter(_) => "invalid-parameter",
            Error::Parse { .. } => "parse",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
            Error::Csv(_) => "csv",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
