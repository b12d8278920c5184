use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid minutia: {0}")]
    InvalidMinutia(String),

    #[error("invalid matching: {0}")]
    InvalidMatching(String),

    #[error("degenerate configuration: {0}")]
    Degenerate(String),

    #[error("unsupported special-function arguments: {0}")]
    Unsupported(String),

    #[error("numerical failure: {0}")]
    Numerical(String),
}

macro_rules! bail {
    ($kind:ident, $($arg:tt)*) => {
        return Err($crate::Error::$kind(alloc::format!($($arg)*)))
    };
}

pub(crate) use bail;
