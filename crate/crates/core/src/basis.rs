//! Cosine eigenbasis of the diffusion operator on `[0, a]` with no-flux ends.

use crate::config::ChannelConfig;
use crate::error::{ModelError, Result};

/// Truncated eigenbasis with `Q` modes.
///
/// Mode µ has wavenumber `γ_µ = µπ/a`, eigenvalue `s_µ = −Dγ_µ²` and
/// normalization `N_µ` (`a` for µ = 0, `a/2` otherwise). The primal
/// eigenfunction's concentration entry and the dual eigenfunction's flux
/// entry are both `cos(γ_µ x)`.
#[derive(Clone, Debug, PartialEq)]
pub struct EigenBasis {
    width: f64,
    wavenumbers: Vec<f64>,
    eigenvalues: Vec<f64>,
    scaling: Vec<f64>,
}

impl EigenBasis {
    pub fn new(cfg: &ChannelConfig, truncation: usize) -> Result<Self> {
        if truncation < 1 {
            return Err(ModelError::parameter("Q", "at least one eigenmode is required"));
        }
        let a = cfg.width_x();
        let d = cfg.diffusion_coeff();
        let wavenumbers: Vec<f64> = (0..truncation)
            .map(|mu| mu as f64 * std::f64::consts::PI / a)
            .collect();
        let eigenvalues = wavenumbers.iter().map(|g| -d * g * g).collect();
        let scaling = (0..truncation)
            .map(|mu| if mu == 0 { a } else { a / 2.0 })
            .collect();
        Ok(Self {
            width: a,
            wavenumbers,
            eigenvalues,
            scaling,
        })
    }

    /// Q.
    pub fn truncation(&self) -> usize {
        self.wavenumbers.len()
    }

    pub fn width(&self) -> f64 {
        self.width
    }

    /// γ_µ in 1/µm.
    pub fn wavenumbers(&self) -> &[f64] {
        &self.wavenumbers
    }

    /// s_µ in 1/µs.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// N_µ in µm.
    pub fn scaling(&self) -> &[f64] {
        &self.scaling
    }

    /// Synthesis row mapping coefficients to c(x): `cos(γ_µ x) / N_µ`.
    pub fn output_row_at(&self, x: f64) -> Vec<f64> {
        self.wavenumbers
            .iter()
            .zip(&self.scaling)
            .map(|(g, n)| (g * x).cos() / n)
            .collect()
    }

    /// Synthesis row at the receptor face, `(−1)^µ / N_µ` exactly.
    pub fn output_row_at_boundary(&self) -> Vec<f64> {
        self.boundary_col()
            .iter()
            .zip(&self.scaling)
            .map(|(s, n)| s / n)
            .collect()
    }

    /// Flux-entry column of the dual eigenfunctions at the receptor face,
    /// `cos(γ_µ a) = (−1)^µ`.
    pub fn boundary_col(&self) -> Vec<f64> {
        (0..self.truncation())
            .map(|mu| if mu % 2 == 0 { 1.0 } else { -1.0 })
            .collect()
    }

    /// `∫₀ᵃ cos(γ_µ x)/N_µ dx`, which is 1 for µ = 0 and 0 otherwise.
    pub fn integrated_output_row(&self) -> Vec<f64> {
        (0..self.truncation())
            .map(|mu| if mu == 0 { 1.0 } else { 0.0 })
            .collect()
    }
}
