use thiserror::Error;

/// Errors produced anywhere in the toolkit.
///
/// Variants split into two families: validation failures (bad input,
/// schema, shapes, sizes) and numeric failures (singular systems,
/// degenerate series, malformed fitted structures). [`Error::is_numeric`]
/// tells them apart; the CLI maps the two families to different exit codes.
#[derive(Debug, Error)]
pub enum Error {
    #[error("schema error: {0}")]
    Schema(String),

    #[error("parse error at row {row}, column '{column}': {message}")]
    Parse {
        row: usize,
        column: String,
        message: String,
    },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("shape error: expected {expected}, got {got}")]
    Shape { expected: String, got: String },

    #[error("size limit exceeded: {0}")]
    Size(String),

    #[error("unsupported model: {0}")]
    UnsupportedModel(String),

    #[error("rank-deficient normal equations")]
    RankDeficient,

    #[error("degenerate series: {0}")]
    Degenerate(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("malformed tree: {0}")]
    MalformedTree(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn shape(expected: impl ToString, got: impl ToString) -> Self {
        Error::Shape {
            expected: expected.to_string(),
            got: got.to_string(),
        }
    }

    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::RankDeficient | Error::Degenerate(_) | Error::Numeric(_) | Error::MalformedTree(_)
        )
    }

    /// Short machine-readable tag for the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Schema(_) => "schema",
            Error::Parse { .. } => "parse",
            Error::Domain(_) => "domain",
            Error::Shape { .. } => "shape",
            Error::Size(_) => "size",
            Error::UnsupportedModel(_) => "unsupported_model",
            Error::RankDeficient => "rank_deficient",
            Error::Degenerate(_) => "degenerate",
            Error::Numeric(_) => "numeric",
            Error::MalformedTree(_) => "malformed_tree",
            Error::Io(_) => "io",
            Error::Csv(_) => "csv",
            Error::Json(_) => "json",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
