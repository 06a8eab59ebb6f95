use thiserror::Error;

/// Errors raised by the library layer.
///
/// Every variant maps onto one of three exit-code classes used by the CLI
/// (see [`Error::class`]).
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid item `{id}`: {reason}")]
    InvalidItem { id: String, reason: String },

    #[error("invalid item bank: {0}")]
    InvalidBank(String),

    #[error("level {level} out of range 0..={max} for item `{id}`")]
    LevelOutOfRange { id: String, level: usize, max: usize },

    #[error("unknown item id `{0}`")]
    UnknownItem(String),

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("non-informative item set at theta = {theta}")]
    NonInformative { theta: f64 },

    #[error("subset size {k} out of range 1..={n}")]
    SubsetSize { k: usize, n: usize },

    #[error("invalid initial subset: {0}")]
    InvalidInit(String),

    #[error("enumeration of {count} subsets exceeds cap {cap}")]
    EnumerationCap { count: u128, cap: u128 },

    #[error("empty response set")]
    EmptyResponses,

    #[error("degenerate item `{0}`: every observed response is at the same level")]
    DegenerateItem(String),

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("invalid prior: {0}")]
    InvalidPrior(String),

    #[error("invalid panel: {0}")]
    InvalidPanel(String),

    #[error("{0}")]
    Usage(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

/// Coarse classification of an [`Error`], used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Usage,
    Validation,
    Numerical,
}

impl ErrorClass {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorClass::Usage => 2,
            ErrorClass::Validation => 3,
            ErrorClass::Numerical => 4,
        }
    }

    pub fn tag(self) -> &'static str {
        match self {
            ErrorClass::Usage => "E_USAGE",
            ErrorClass::Validation => "E_VALIDATION",
            ErrorClass::Numerical => "E_NUMERICAL",
        }
    }
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::SubsetSize { .. } | Error::InvalidInit(_) | Error::EnumerationCap { .. } | Error::Usage(_) => {
                ErrorClass::Usage
            }
            Error::NonInformative { .. } | Error::Numerical(_) => ErrorClass::Numerical,
            _ => ErrorClass::Validation,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
