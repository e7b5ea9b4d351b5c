//! Crate-wide error type.

use alloc::string::String;

/// Errors produced by model construction, integration, sampling, fitting and
/// identifiability diagnostics.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// Invalid input: dimension mismatches, unknown names, bad options.
    #[error("{0}")]
    Validation(String),

    /// The ODE integrator could not complete; `t` is the failing time.
    #[error("integration failed at t = {t}: {reason}")]
    Integration { t: f64, reason: String },

    /// A quantity required for the computation is degenerate (zero variance,
    /// identical samples, empty data, ...).
    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// Rejection sampling accepted too small a fraction of proposals; the
    /// posterior barely intersects the prior box.
    #[error(
        "acceptance rate {rate:.2e} below 1e-3: the Gaussian posterior barely \
         intersects the prior box; check bounds or refit"
    )]
    LowAcceptance { rate: f64 },

    /// The optimizer failed on every attempt.
    #[error("optimization failed: {0}")]
    Optimization(String),

    /// A redundant structural coefficient does not match its defining
    /// combination, so the coefficient set cannot come from one parameter set.
    #[error("inconsistent coefficient set: {0}")]
    Inconsistent(String),
}

pub type Result<T> = core::result::Result<T, Error>;

impl Error {
    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }
}
