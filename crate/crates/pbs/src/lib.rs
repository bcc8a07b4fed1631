//! Particle-based Brownian dynamics reference simulator for the synaptic
//! cleft: a reflecting box with disk receptors on one face, reversible
//! saturating binding and first-order degradation.

pub mod calibrate;
pub mod ensemble;
pub mod error;
pub mod receptors;
pub mod world;

pub use calibrate::{calibrate_homogenization, CalibrationResult, CalibrationSettings};
pub use ensemble::{ensemble, simulate, EnsembleResult, RunPlan, RunRecord};
pub use error::{PbsError, Result};
pub use world::{binding_probability, Counts, World};
