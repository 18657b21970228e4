use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {op}: expected {expected}, got {got}")]
    Shape {
        op: &'static str,
        expected: String,
        got: String,
    },

    #[error("invalid config field `{field}`: {reason}")]
    InvalidConfig { field: String, reason: String },

    #[error("non-finite value encountered in {0}")]
    NonFinite(String),

    #[error("non-deterministic layer state: {0}")]
    NonDeterministic(String),

    #[error("backward called on {0} without a live forward cache")]
    MissingCache(&'static str),

    #[error("dataset has no file at {}", .0.display())]
    MissingFile(PathBuf),

    #[error("header mismatch: column `{0}` not found")]
    HeaderMismatch(String),

    #[error("row {row}: {reason}")]
    BadRow { row: usize, reason: String },

    #[error("row {row}, column `{column}`: cannot parse `{value}`")]
    BadCell {
        row: usize,
        column: String,
        value: String,
    },

    #[error("timestamps not hourly at row {row}: {reason}")]
    Timestamp { row: usize, reason: String },

    #[error("unseen category `{category}` in column `{column}`")]
    UnseenCategory { column: String, category: String },

    #[error("unknown column `{0}`")]
    UnknownColumn(String),

    #[error("series too short: need at least {required} rows, have {available}")]
    TooShort { required: usize, available: usize },

    #[error("invalid split: {0}")]
    Split(String),

    #[error("empty input: {0}")]
    Empty(String),

    #[error("training diverged: non-finite loss at epoch {epoch}, batch {batch}")]
    Diverged { epoch: usize, batch: usize },

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn shape(op: &'static str, expected: impl ToString, got: impl ToString) -> Self {
        Error::Shape {
            op,
            expected: expected.to_string(),
            got: got.to_string(),
        }
    }

    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidConfig {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

/// Tags errors from a pipeline stage with the stage name.
pub(crate) trait StageExt<T> {
    fn stage(self, stage: &'static str) -> Result<T>;
}

impl<T, E: Into<Error>> StageExt<T> for std::result::Result<T, E> {
    fn stage(self, stage: &'static str) -> Result<T> {
        self.map_err(|e| Error::Stage {
            stage,
            source: Box::new(e.into()),
        })
    }
}
