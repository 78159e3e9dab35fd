use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("io error: {0}")]
    Stream(#[from] std::io::Error),

    /// Input that violates an operation's domain (empty corpus, empty sequence, ...).
    #[error("domain error: {0}")]
    Domain(String),

    #[error("malformed input at row {row}: {reason}")]
    Malformed { row: usize, reason: String },

    #[error("non-finite score at row {row}")]
    NonFinite { row: usize },

    #[error("score {score} for id {id} outside declared range [{lo}, {hi}]")]
    OutOfRange { id: usize, score: f64, lo: f64, hi: f64 },

    #[error("score column `{method}` is missing ids {}", fmt_ids(.ids))]
    MissingIds { method: String, ids: Vec<usize> },

    #[error("score column `{method}` references ids not in the corpus: {}", fmt_ids(.ids))]
    UnknownIds { method: String, ids: Vec<usize> },

    #[error("duplicate id {id} in `{method}`")]
    DuplicateId { method: String, id: usize },

    #[error("external scorer failed: {0}")]
    Scorer(String),

    #[error("column `{0}` already exists")]
    ColumnExists(String),

    #[error("unknown column `{0}`")]
    UnknownColumn(String),

    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

/// Lists at most 20 ids, then a count of the rest.
fn fmt_ids(ids: &[usize]) -> String {
    const SHOWN: usize = 20;
    let head: Vec<String> = ids.iter().take(SHOWN).map(|i| i.to_string()).collect();
    if ids.len() > SHOWN {
        format!("{{{}, ... ({} more)}}", head.join(", "), ids.len() - SHOWN)
    } else {
        format!("{{{}}}", head.join(", "))
    }
}
