use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Operand shapes are incompatible for the named operation.
    Shape {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },
    InvalidAxis { axis: usize, rank: usize },
    IndexOutOfRange { what: &'static str, index: usize, len: usize },
    NonScalarLoss { shape: Vec<usize> },
    BackwardTwice,
    /// A loss or parameter became NaN/inf; `param` names the first offender.
    NonFinite { param: String },
    EmptyInput(&'static str),
    InvalidConfig(String),
    UnknownProduct(String),
    MissingEmbedding(String),
    SequenceTooLong { len: usize, max_len: usize },
    Mismatch(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Shape { op, left, right } => {
                write!(f, "{op}: incompatible shapes {left:?} and {right:?}")
            }
            Error::InvalidAxis { axis, rank } => {
                write!(f, "axis {axis} out of range for rank-{rank} tensor")
            }
            Error::IndexOutOfRange { what, index, len } => {
                write!(f, "{what} index {index} out of range (len {len})")
            }
            Error::NonScalarLoss { shape } => {
                write!(f, "backward requires a scalar loss, got shape {shape:?}")
            }
            Error::BackwardTwice => {
                write!(f, "backward already ran on this tape; call zero_grad first")
            }
            Error::NonFinite { param } => write!(f, "non-finite value in {param}"),
            Error::EmptyInput(what) => write!(f, "empty input: {what}"),
            Error::InvalidConfig(msg) => write!(f, "invalid config: {msg}"),
            Error::UnknownProduct(id) => write!(f, "unknown product id {id:?}"),
            Error::MissingEmbedding(id) => write!(f, "no embedding for product {id:?}"),
            Error::SequenceTooLong { len, max_len } => {
                write!(f, "sequence of length {len} exceeds max_len {max_len}")
            }
            Error::Mismatch(msg) => write!(f, "{msg}"),
        }
    }
}

impl core::error::Error for Error {}
