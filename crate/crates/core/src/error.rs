use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A precondition on an argument was violated.
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    /// A configuration field failed validation.
    #[error("invalid configuration field `{field}`: {reason}")]
    Config { field: String, reason: String },

    #[error("solution blew up at t = {t}: ‖v‖ = {norm:e} exceeds ceiling {ceiling:e}")]
    BlowUp { t: f64, norm: f64, ceiling: f64 },

    #[error("root finding did not converge: {0}")]
    NonConvergence(String),

    /// A characteristic root with vanishing derivative; generalized eigenfunctions
    /// would be needed to build the projection.
    #[error("defective characteristic root λ = {re} + {im}i in mode {mode} (|g'(λ)| = {derivative:e})")]
    DefectiveRoot { re: f64, im: f64, mode: usize, derivative: f64 },

    #[error("coverage audit failed: {0}")]
    CoverageAudit(String),

    #[error("internal consistency fault: {0}")]
    InternalConsistency(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter { name, reason: reason.into() }
    }

    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config { field: field.into(), reason: reason.into() }
    }
}
