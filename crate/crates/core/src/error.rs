use alloc::string::String;
use core::fmt;

pub type Result<T, E = Error> = core::result::Result<T, E>;

/// Errors raised by the core library.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Malformed CoNLL-U or raw corpus input. `line` is 1-based.
    Parse { line: usize, message: String },
    /// Incompatible tensor shapes passed to an operation.
    Shape { op: &'static str, message: String },
    /// A sentence or treebank that cannot be used for the requested operation.
    InvalidInput(String),
    /// Two treebanks whose sentences or tokens do not line up.
    Alignment(String),
    /// Malformed word embedding data.
    Embedding(String),
}

impl Error {
    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }

    pub(crate) fn shape(op: &'static str, message: impl Into<String>) -> Self {
        Error::Shape {
            op,
            message: message.into(),
        }
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Parse { line, message } => write!(f, "line {}: {}", line, message),
            Error::Shape { op, message } => write!(f, "{}: shape mismatch: {}", op, message),
            Error::InvalidInput(m) => write!(f, "invalid input: {}", m),
            Error::Alignment(m) => write!(f, "alignment mismatch: {}", m),
            Error::Embedding(m) => write!(f, "embeddings: {}", m),
        }
    }
}

impl core::error::Error for Error {}
