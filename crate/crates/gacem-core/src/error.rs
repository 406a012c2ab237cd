use alloc::string::String;
use core::fmt;

/// Crate-wide error type.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Error {
    /// Tensor shapes are incompatible with the requested operation.
    Shape(String),
    /// A numeric argument is outside its documented domain.
    Domain(String),
    /// A caller-side precondition was violated.
    Contract(String),
    /// An invalid configuration value.
    Config(String),
    /// A request exceeds a hard enumeration/capacity limit.
    Capacity(String),
    /// The requested metric is not defined for this input.
    Unsupported(String),
    /// A numerical fault surfaced during training.
    Fault(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Shape(m) => write!(f, "shape error: {m}"),
            Error::Domain(m) => write!(f, "domain error: {m}"),
            Error::Contract(m) => write!(f, "contract error: {m}"),
            Error::Config(m) => write!(f, "config error: {m}"),
            Error::Capacity(m) => write!(f, "capacity error: {m}"),
            Error::Unsupported(m) => write!(f, "unsupported: {m}"),
            Error::Fault(m) => write!(f, "training fault: {m}"),
        }
    }
}

impl core::error::Error for Error {}

pub type Result<T> = core::result::Result<T, Error>;
