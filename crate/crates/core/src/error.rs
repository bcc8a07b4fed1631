use thiserror::Error;

/// Errors raised by the deterministic and statistical models.
#[derive(Debug, Error)]
pub enum ModelError {
    #[error("failed to parse configuration: {0}")]
    Parse(String),

    #[error("missing required field `{0}`")]
    MissingField(&'static str),

    #[error("invalid value for `{field}`: {reason}")]
    Validation { field: &'static str, reason: String },

    #[error("invalid parameter `{name}`: {reason}")]
    Parameter { name: &'static str, reason: String },

    #[error("outside the model domain: {0}")]
    Domain(String),

    #[error(
        "bound count {bound} left [0, {capacity}] at step {step}; reduce the sample interval"
    )]
    Stability {
        step: u64,
        bound: f64,
        capacity: f64,
    },
}

impl ModelError {
    pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Self {
        Self::Validation {
            field,
            reason: reason.into(),
        }
    }

    pub(crate) fn parameter(name: &'static str, reason: impl Into<String>) -> Self {
        Self::Parameter {
            name,
            reason: reason.into(),
        }
    }

    /// Whether the error is a numerical failure rather than bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Self::Stability { .. })
    }
}

pub type Result<T, E = ModelError> = std::result::Result<T, E>;
