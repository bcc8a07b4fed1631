//! Deterministic and statistical models of the expected received signal in a
//! diffusive molecular channel with saturating, reversible receptors.

pub mod basis;
pub mod config;
pub mod error;
pub mod ssd;
pub mod stats;
pub mod steady;
pub mod trace;

pub use config::{ChannelConfig, Config, ReleaseSchedule, SolverSettings};
pub use error::{ModelError, Result};
pub use trace::SignalTrace;
