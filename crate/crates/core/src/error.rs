use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

/// Error type shared by the tensor engine, layers, models, and training loop.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Operand shapes do not conform for the named operation.
    DimMismatch {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },
    /// An operation produced or received a NaN/Inf value.
    NonFinite { op: &'static str, detail: String },
    /// A caller violated an operation's contract (e.g. backward on a non-scalar).
    Contract(String),
    /// Invalid input data (empty sentence, out-of-range label, ...).
    Input(String),
    /// Inconsistent model or training configuration.
    Config(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::DimMismatch { op, lhs, rhs } => {
                write!(f, "{op}: dimension mismatch between shapes {lhs:?} and {rhs:?}")
            }
            Error::NonFinite { op, detail } => write!(f, "{op}: non-finite value: {detail}"),
            Error::Contract(msg) => write!(f, "contract violation: {msg}"),
            Error::Input(msg) => write!(f, "invalid input: {msg}"),
            Error::Config(msg) => write!(f, "invalid configuration: {msg}"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for Error {}

pub type Result<T> = core::result::Result<T, Error>;
