use alloc::string::String;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("unsupported domain kind: {0}")]
    DomainKind(String),
    #[error("range error: {0}")]
    Range(String),
    #[error("singular point: {0}")]
    SingularPoint(String),
    #[error("coincident arguments: {0}")]
    Coincidence(String),
    #[error("parameter error: {0}")]
    Parameter(String),
    #[error("accuracy error: {0}")]
    Accuracy(String),
    #[error("resolution error: {0}")]
    Resolution(String),
    #[error("placement error: {0}")]
    Placement(String),
    #[error("sampling error: {0}")]
    Sampling(String),
    #[error("solver error: {0}")]
    Solver(String),
    #[error("spectrum error: {0}")]
    Spectrum(String),
    #[error("eigen error: {0}")]
    Eigen(String),
    #[error("convergence error: {0}")]
    Convergence(String),
    #[error("precondition failed: {0}")]
    Precondition(String),
}

pub type Result<T> = core::result::Result<T, Error>;

macro_rules! bail {
    ($kind:ident, $($arg:tt)*) => {
        return Err($crate::error::Error::$kind(alloc::format!($($arg)*)))
    };
}
pub(crate) use bail;
