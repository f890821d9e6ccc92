use std::path::PathBuf;

/// Errors produced anywhere in the toolkit.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("invalid UTF-8 at byte offset {offset}")]
    InvalidUtf8 { offset: usize },

    #[error("vocab size {requested} is smaller than the required minimum {minimum}")]
    VocabTooSmall { requested: usize, minimum: usize },

    #[error("symbol {0:?} is not in the vocabulary and no fallback is configured")]
    UnknownSymbol(String),

    #[error("token id {id} is out of range for a vocabulary of {size}")]
    IdOutOfRange { id: u32, size: usize },

    #[error("{file}:{line}: {message}")]
    Parse {
        file: String,
        line: usize,
        message: String,
    },

    #[error("word {0:?} cannot be segmented with the current pieces")]
    Uncoverable(String),

    #[error("baseline token sequence is empty")]
    EmptyBaseline,

    #[error("token sequence has no words")]
    NoWords,

    #[error("evaluation texts differ between report entries ({0})")]
    MismatchedEvalText(String),

    #[error("{} tokenizer(s) failed: {}", .0.len(), .0.join(", "))]
    TokenizersFailed(Vec<String>),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(file: impl Into<String>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            file: file.into(),
            line,
            message: message.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
