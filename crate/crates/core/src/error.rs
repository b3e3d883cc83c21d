use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("schema error at `{field}`: {reason}")]
    Schema { field: String, reason: String },

    #[error("reward {reward} outside [{r_min}, {r_max})")]
    OutOfRange { reward: f64, r_min: f64, r_max: f64 },

    #[error("training diverged after {iteration} iterations (loss = {loss})")]
    Divergence { iteration: usize, loss: f64 },

    #[error("confusion matrix is not invertible (residual {residual:e})")]
    Inversion { residual: f64 },

    #[error("quantile query on an empty stream")]
    EmptyStream,

    #[error("usage error: {0}")]
    Usage(String),

    #[error("parse error on line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    pub fn schema(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Schema {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
