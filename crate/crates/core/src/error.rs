use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("schema error: {0}")]
    Schema(String),

    #[error("duplicate key: firm {firm_id} year {year}")]
    DuplicateKey { firm_id: String, year: i32 },

    #[error("parse error at row {row}, column {column}: {value:?} is not numeric")]
    Parse {
        row: usize,
        column: String,
        value: String,
    },

    #[error("parameter error: {0}")]
    Parameter(String),

    #[error("incomplete timeline for firm {firm_id}: year {missing_year} absent")]
    IncompleteTimeline { firm_id: String, missing_year: i32 },

    #[error("degenerate outcome: {0}")]
    DegenerateOutcome(String),

    #[error("missing data: {0}")]
    MissingData(String),

    #[error("alignment error: {0}")]
    Alignment(String),

    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    #[error("collinear design: {0} block is linearly dependent on earlier regressors")]
    Collinearity(String),

    #[error("generator spec error: {0}")]
    Spec(String),

    #[error("model document error: {0}")]
    Document(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable snake_case category, for machine-readable reporting.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Schema(_) => "schema",
            Error::DuplicateKey { .. } => "duplicate_key",
            Error::Parse { .. } => "parse",
            Error::Parameter(_) => "parameter",
            Error::IncompleteTimeline { .. } => "incomplete_timeline",
            Error::DegenerateOutcome(_) => "degenerate_outcome",
            Error::MissingData(_) => "missing_data",
            Error::Alignment(_) => "alignment",
            Error::UndefinedMetric(_) => "undefined_metric",
            Error::Collinearity(_) => "collinearity",
            Error::Spec(_) => "spec",
            Error::Document(_) => "document",
            Error::Io { .. } => "io",
            Error::Csv(_) => "csv",
            Error::Json(_) => "json",
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
