use dmc_core::ModelError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PbsError {
    #[error(transparent)]
    Model(#[from] ModelError),

    #[error("invalid parameter `{name}`: {reason}")]
    Parameter { name: &'static str, reason: String },

    #[error("could not place {requested} receptors of radius {radius} µm: {reason}")]
    Placement {
        requested: u64,
        radius: f64,
        reason: String,
    },

    #[error("homogenization fit failed: {0}")]
    Calibration(String),
}

impl PbsError {
    pub(crate) fn parameter(name: &'static str, reason: impl Into<String>) -> Self {
        Self::Parameter {
            name,
            reason: reason.into(),
        }
    }
}

pub type Result<T, E = PbsError> = std::result::Result<T, E>;
