use thiserror::Error;

/// Coarse error classes; the CLI maps each to a distinct exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Usage,
    Data,
    Infeasible,
    Corruption,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown feature `{0}`")]
    UnknownFeature(String),

    #[error("unknown column `{0}` in header")]
    UnknownColumn(String),

    #[error("column for feature `{0}` missing from header")]
    MissingColumn(String),

    #[error("empty header")]
    EmptyHeader,

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid schema: {0}")]
    Schema(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("no candidate case shares a known feature with the query")]
    NoComparableCases,

    #[error("no neighbor has a known value for feature `{0}`")]
    ActionUnavailable(String),

    #[error("feature `{0}` cannot be predicted from any other feature")]
    Unpredictable(String),

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("no counterfactual exists: every case shares the suggested action")]
    NoCounterfactual,

    #[error("archetype undefined: {0}")]
    NoArchetype(String),

    #[error("snapshot format version {found} is not supported (expected {expected})")]
    Version { found: u32, expected: u32 },

    #[error("corrupt snapshot: {0}")]
    Corrupt(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::UnknownFeature(_) | Error::InvalidArgument(_) => ErrorClass::Usage,
            Error::Infeasible(_)
            | Error::NoCounterfactual
            | Error::NoArchetype(_)
            | Error::NoComparableCases
            | Error::ActionUnavailable(_)
            | Error::Unpredictable(_) => ErrorClass::Infeasible,
            Error::Version { .. } | Error::Corrupt(_) => ErrorClass::Corruption,
            Error::UnknownColumn(_)
            | Error::MissingColumn(_)
            | Error::EmptyHeader
            | Error::Parse { .. }
            | Error::Schema(_)
            | Error::Io(_) => ErrorClass::Data,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
