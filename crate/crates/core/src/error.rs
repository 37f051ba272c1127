use thiserror::Error;

/// Errors produced by the simulation library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("non-finite value in {context}")]
    NonFinite { context: String },

    #[error("t = {t} lies outside every {which} revival window; nearest valid center is t = {nearest_center} (half-width {half_width})")]
    OutOfWindow {
        which: &'static str,
        t: f64,
        nearest_center: f64,
        half_width: f64,
    },

    #[error("truncation inadequate: tail mass {tail_mass:e} exceeds {threshold:e} ({context})")]
    Truncation {
        tail_mass: f64,
        threshold: f64,
        context: String,
    },

    #[error("integrator did not converge: {context} (difference {difference:e} > {tolerance:e})")]
    Convergence {
        context: String,
        difference: f64,
        tolerance: f64,
    },

    #[error("trace collapsed to {trace:e} at t = {t}")]
    TraceCollapse { trace: f64, t: f64 },

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn non_finite(context: impl Into<String>) -> Self {
        Error::NonFinite {
            context: context.into(),
        }
    }

    /// True for failures of the numerical machinery, as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NonFinite { .. }
                | Error::Truncation { .. }
                | Error::Convergence { .. }
                | Error::TraceCollapse { .. }
                | Error::Invariant(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
