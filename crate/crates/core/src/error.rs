use thiserror::Error;

/// Errors produced by the library's numeric kernels and simulation loop.
///
/// Configuration-file parse errors have their own aggregated type,
/// [`crate::config::ConfigError`], and are converted into `Config` here
/// when they cross a library boundary.
#[derive(Debug, Error)]
pub enum Error {
    /// Input outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A computation produced a non-finite intermediate or failed to
    /// converge in a way that cannot be recovered.
    #[error("numeric error: {0}")]
    Numeric(String),

    /// A semantic configuration problem (invariant violation) detected
    /// outside the config parser.
    #[error("config error: {0}")]
    Config(String),

    /// A run-level failure (training divergence and the like).
    #[error("run error: {0}")]
    Run(String),

    /// Internal bookkeeping disagreement; indicates a bug.
    #[error("internal consistency error: {0}")]
    Inconsistency(String),
}

pub type Result<T> = std::result::Result<T, Error>;
