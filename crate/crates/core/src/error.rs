use thiserror::Error;

/// Errors raised by the mapping, filtering and risk routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("cell index ({col}, {row}) outside {width}x{height} grid")]
    InvalidIndex {
        col: usize,
        row: usize,
        width: usize,
        height: usize,
    },
    #[error("grid specifications do not match")]
    SpecMismatch,
    #[error("invalid value for `{field}`: {reason}")]
    InvalidParameter { field: String, reason: String },
    #[error("unknown vehicle `{0}`")]
    UnknownVehicle(String),
    #[error("time {t} outside trajectory span [{start}, {end}]")]
    TimeOutOfSpan { t: f64, start: f64, end: f64 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
