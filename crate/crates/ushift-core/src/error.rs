use thiserror::Error;

/// Error type shared by all modules.
#[derive(Debug, Error)]
pub enum Error {
    /// A distribution, functional or kernel was built from invalid parameters.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// An operation was called with arguments outside its contract.
    #[error("invalid argument: {0}")]
    Argument(String),

    /// A kernel or estimator produced a non-finite value.
    #[error("numeric failure: {0}")]
    Numeric(String),

    /// The long-run variance estimate is indistinguishable from zero, so the
    /// n^(-3/2) normalization of the central limit theorem does not apply.
    #[error("degenerate-variance: sigma2 = {sigma2:e} with standard error {se:e}; the normalization should change")]
    DegenerateVariance { sigma2: f64, se: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
