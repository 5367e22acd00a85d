use alloc::string::String;
use core::fmt;

use crate::depstruct::TreeError;
use crate::sentence::SentenceError;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Operand shapes do not fit the operation. `what` names the operation
    /// and, where one is involved, the parameter.
    Shape { what: String, expected: (usize, usize), found: (usize, usize) },
    IndexOutOfRange { what: &'static str, index: usize, len: usize },
    Empty(&'static str),
    NonScalarLoss { rows: usize, cols: usize },
    InvalidArgument(String),
    Tree(TreeError),
    Sentence(SentenceError),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Shape { what, expected, found } => write!(
                f,
                "dimension mismatch in {what}: expected {}x{}, found {}x{}",
                expected.0, expected.1, found.0, found.1
            ),
            Error::IndexOutOfRange { what, index, len } => {
                write!(f, "{what} index {index} out of range (size {len})")
            }
            Error::Empty(what) => write!(f, "{what}: empty input"),
            Error::NonScalarLoss { rows, cols } => {
                write!(f, "loss must be a scalar, found {rows}x{cols}")
            }
            Error::InvalidArgument(msg) => f.write_str(msg),
            Error::Tree(e) => write!(f, "invalid dependency tree: {e}"),
            Error::Sentence(e) => write!(f, "invalid sentence: {e}"),
        }
    }
}

impl core::error::Error for Error {}

impl From<TreeError> for Error {
    fn from(e: TreeError) -> Self {
        Error::Tree(e)
    }
}

impl From<SentenceError> for Error {
    fn from(e: SentenceError) -> Self {
        Error::Sentence(e)
    }
}
