use alloc::string::String;

/// Errors raised by the pipeline core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("shape error: {0}")]
    Shape(String),
    #[error("validation error: {0}")]
    Validation(String),
    #[error("input too short: {len} samples, need at least {required}")]
    InputTooShort { len: usize, required: usize },
    #[error("no lead seizure has any preictal data on the timeline")]
    EmptyPreictal,
    #[error("no windows could be extracted")]
    EmptyDataset,
    #[error("insufficient lead seizures: found {found}, need at least {required}")]
    InsufficientSeizures { found: usize, required: usize },
    #[error("insufficient cross-validation folds: found {found}, need at least 2")]
    InsufficientFolds { found: usize },
    #[error("metric undefined: {0}")]
    UndefinedMetric(&'static str),
    #[error("leakage: {0}")]
    Leakage(String),
    #[error("empty sequence")]
    EmptySequence,
    #[error("non-finite values in {0}")]
    NonFinite(&'static str),
    #[error("every cross-validation fold was skipped")]
    AllFoldsSkipped,
}

pub type Result<T, E = Error> = core::result::Result<T, E>;

macro_rules! shape_err {
    ($($arg:tt)*) => { $crate::error::Error::Shape(alloc::format!($($arg)*)) };
}

macro_rules! invalid {
    ($($arg:tt)*) => { $crate::error::Error::Validation(alloc::format!($($arg)*)) };
}

pub(crate) use invalid;
pub(crate) use shape_err;
