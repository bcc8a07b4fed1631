use dmc_core::ModelError;
use dmc_pbs::PbsError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("{0}")]
    Usage(String),

    #[error("{0}")]
    Validation(String),

    #[error("{0}")]
    Numerical(String),

    #[error("{0}")]
    Calibration(String),

    #[error("{context}: {source}")]
    Io {
        context: String,
        source: std::io::Error,
    },
}

impl HarnessError {
    /// Process exit status for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Usage(_) => 1,
            Self::Validation(_) | Self::Io { .. } => 2,
            Self::Numerical(_) => 3,
            Self::Calibration(_) => 4,
        }
    }

    pub fn usage(msg: impl Into<String>) -> Self {
        Self::Usage(msg.into())
    }

    pub fn invalid(msg: impl Into<String>) -> Self {
        Self::Validation(msg.into())
    }

    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Self::Io {
            context: context.into(),
            source,
        }
    }

    /// Prefix the message with the sweep point or step that failed.
    pub fn at(self, point: &str) -> Self {
        match self {
            Self::Usage(m) => Self::Usage(format!("{point}: {m}")),
            Self::Validation(m) => Self::Validation(format!("{point}: {m}")),
            Self::Numerical(m) => Self::Numerical(format!("{point}: {m}")),
            Self::Calibration(m) => Self::Calibration(format!("{point}: {m}")),
            io => io,
        }
    }
}

impl From<ModelError> for HarnessError {
    fn from(e: ModelError) -> Self {
        if e.is_numerical() {
            Self::Numerical(e.to_string())
        } else {
            Self::Validation(e.to_string())
        }
    }
}

impl From<PbsError> for HarnessError {
    fn from(e: PbsError) -> Self {
        match e {
            PbsError::Model(m) => m.into(),
            PbsError::Calibration(m) => Self::Calibration(m),
            other => Self::Validation(other.to_string()),
        }
    }
}

pub type Result<T, E = HarnessError> = std::result::Result<T, E>;
