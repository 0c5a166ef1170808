use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Input that violates a precondition of the statistics (too few samples, bad labels).
    #[error("ill-posed input: {0}")]
    IllPosed(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A Mahalanobis statistic stayed non-finite after ridge regularization.
    #[error("non-finite statistic for variables ({i}, {j}): {detail}")]
    Numerical { i: usize, j: usize, detail: String },

    #[error("no variables have standard deviation above {threshold}; lower the threshold")]
    EmptyAfterPrescreen { threshold: f64 },

    #[error("row {row}, column {col}: cannot parse {value:?} as a number")]
    ParseNumber { row: usize, col: usize, value: String },

    #[error("row {row}: expected {expected} fields, found {found}")]
    Ragged {
        row: usize,
        expected: usize,
        found: usize,
    },

    #[error("label {0:?} has no entry in the label mapping")]
    UnknownLabel(String),

    #[error("malformed label mapping: {0}")]
    LabelMap(String),

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
    pub(crate) fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }
}
