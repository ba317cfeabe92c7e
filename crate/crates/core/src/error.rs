use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("time {t} outside of span [{start}, {end}]")]
    OutOfRange { t: f64, start: f64, end: f64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("pixel radius {radius} px exceeds field of view (max {max_radius} px)")]
    OutOfFov { radius: f64, max_radius: f64 },

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("target field of view not covered by source: {uncovered_fraction:.4} of target pixels uncovered")]
    Coverage { uncovered_fraction: f64 },

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("clip {clip_id}: missing attribute `{attribute}`")]
    MissingAttribute { clip_id: String, attribute: String },

    #[error("parse error at {path}: {message}")]
    Parse { path: String, message: String },

    #[error("stage `{stage}` failed for {context}: {message}")]
    Stage {
        stage: String,
        context: String,
        message: String,
    },

    #[error("service {endpoint}: {message}")]
    Service { endpoint: String, message: String },

    #[error("pipeline interrupted after {writes} manifest writes")]
    Interrupted { writes: usize },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<String>, message: impl std::fmt::Display) -> Self {
        Error::Parse {
            path: path.into(),
            message: message.to_string(),
        }
    }
}
