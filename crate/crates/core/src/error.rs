use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("no entities")]
    NoEntities,

    #[error("duplicate entity id `{0}`")]
    DuplicateEntity(String),

    #[error("line {line}: triple references unknown entity `{id}`")]
    DanglingReference { line: usize, id: String },

    #[error("unknown entity `{0}`")]
    UnknownEntity(String),

    #[error("item `{0}` has no category")]
    MissingCategory(String),

    #[error("item `{item}` belongs to several categories: {categories:?}")]
    MultipleCategories { item: String, categories: Vec<String> },

    #[error("category `{0}` has no members")]
    EmptyCategory(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("word vector file truncated: header declares {declared} rows, found {found}")]
    TruncatedVectors { declared: usize, found: usize },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("no template for act {act} with arity {arity}")]
    MissingTemplate { act: String, arity: String },

    #[error("invalid config value for `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("recommended item `{0}` is outside the item universe")]
    OutsideUniverse(String),

    #[error("length mismatch: {0} hypotheses vs {1} references")]
    LengthMismatch(usize, usize),

    #[error("invalid parameters: {0}")]
    Params(String),

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }

    pub(crate) fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }
}

pub(crate) fn read_to_string(path: &std::path::Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}
