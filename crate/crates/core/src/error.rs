use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Bad dimensions, out-of-range widths, empty inputs and similar caller mistakes.
    #[error("invalid argument: {0}")]
    Argument(String),
    /// A structural invariant (pair cover, permutation bijection) does not hold.
    #[error("invariant violated: {0}")]
    Invariant(String),
    /// An iterative method failed to converge or produced unusable values.
    #[error("numerical failure: {0}")]
    Numerical(String),
    /// A fixed-point intermediate left the 64-bit range.
    #[error("integer overflow: {0}")]
    Overflow(String),
}

pub type Result<T> = std::result::Result<T, Error>;

macro_rules! bail_arg {
    ($($arg:tt)*) => {
        return Err($crate::error::Error::Argument(format!($($arg)*)))
    };
}
pub(crate) use bail_arg;
