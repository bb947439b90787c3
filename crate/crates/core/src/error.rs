use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },
    #[error("duplicate id `{0}`")]
    DuplicateId(String),
    #[error("unknown id `{0}`")]
    UnknownId(String),
    #[error("{name} out of range: {detail}")]
    OutOfRange { name: &'static str, detail: String },
    #[error("constant input: {0}")]
    Constant(String),
    #[error("invalid UTF-8 in text {text} at byte {offset}")]
    InvalidUtf8 { text: usize, offset: usize },
    #[error("support violation: p > 0 where q = 0 at outcome {0}")]
    Support(usize),
    #[error("zero-probability transition at position {0}")]
    ZeroProbability(usize),
    #[error("{groups} distinct groups cannot fill {folds} folds")]
    TooFewGroups { groups: usize, folds: usize },
    #[error("expected unit {expected}, found {found}")]
    Unit {
        expected: &'static str,
        found: &'static str,
    },
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl Error {
    pub(crate) fn range(name: &'static str, detail: impl Into<String>) -> Self {
        Error::OutOfRange {
            name,
            detail: detail.into(),
        }
    }
}
