use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {op}: {left:?} vs {right:?}")]
    Shape {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("non-finite value while evaluating {context}")]
    Numeric { context: String },

    #[error("invalid state: {0}")]
    State(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("sentence {sentence}: {message}")]
    Structure { sentence: usize, message: String },

    #[error("unknown vocabulary entry: {0}")]
    Vocabulary(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("malformed parameter file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn shape_err<T>(op: &'static str, left: &[usize], right: &[usize]) -> Result<T> {
    Err(Error::Shape {
        op,
        left: left.to_vec(),
        right: right.to_vec(),
    })
}
