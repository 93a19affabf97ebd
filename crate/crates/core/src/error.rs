use thiserror::Error;

pub type Result<T, E = AoaError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum AoaError {
    /// Input data violates a precondition (shape, missing values, ranges).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("unknown predictor `{0}`")]
    UnknownPredictor(String),

    #[error("grid geometry mismatch: {0}")]
    GeometryMismatch(String),

    #[error("degenerate data: {0}")]
    Degenerate(String),

    #[error("fold error: {0}")]
    Fold(String),

    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },

    #[error("scenario `{id}` failed: {source}")]
    Scenario {
        id: String,
        #[source]
        source: Box<AoaError>,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl AoaError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        AoaError::InvalidInput(msg.into())
    }

    pub(crate) fn degenerate(msg: impl Into<String>) -> Self {
        AoaError::Degenerate(msg.into())
    }

    pub(crate) fn parse(location: impl Into<String>, message: impl Into<String>) -> Self {
        AoaError::Parse {
            location: location.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        AoaError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}
