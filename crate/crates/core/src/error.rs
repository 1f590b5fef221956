use thiserror::Error;

/// Failure modes shared by every module of the crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("divergent quantity: {0}")]
    Divergence(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("insufficient resolution: {0}")]
    Resolution(String),
    #[error("resource limit exceeded: {0}")]
    Resource(String),
    #[error("estimation failed: {message} (residual {residual:.3e})")]
    Estimation { message: String, residual: f64 },
    #[error("order nu = {0} is not positive")]
    NonPositiveNu(f64),
    #[error("sector (n=2, a=0, l=0) is excluded")]
    SectorExcluded,
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}

pub(crate) fn config<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Config(msg.into()))
}
