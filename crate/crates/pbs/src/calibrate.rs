//! Fit of the homogenized binding rate κ_a to simulated steady states.
//!
//! For each release size N the simulator is run without degradation and the
//! bound count is averaged over a late time window, then over runs. The single
//! ratio `h = κ_a / (ρ κ_a0)` minimizing the squared error between the
//! equilibrium root and these averages is returned.

use rayon::prelude::*;
use serde::Serialize;

use dmc_core::config::{ChannelConfig, ReleaseSchedule};
use dmc_core::steady;

use crate::ensemble::{simulate, RunPlan};
use crate::error::{PbsError, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct CalibrationSettings {
    /// Release sizes N.
    pub releases: Vec<u64>,
    pub runs: u64,
    pub seed: u64,
    pub time_step: f64,
    /// Averaging window, µs. The run ends at its upper end.
    pub window: (f64, f64),
    /// Spacing of the samples averaged inside the window, µs.
    pub sample_every: f64,
    /// Largest accepted relative RMS residual of the fit.
    pub max_relative_rms: f64,
}

impl Default for CalibrationSettings {
    fn default() -> Self {
        Self {
            releases: vec![250, 500, 1000],
            runs: 150,
            seed: 0,
            time_step: 0.01,
            window: (400.0, 600.0),
            sample_every: 1.0,
            max_relative_rms: 0.05,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CalibrationPoint {
    pub releases: u64,
    pub simulated_mean: f64,
    pub simulated_sem: f64,
    pub fitted_equilibrium: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CalibrationResult {
    pub effective_binding_rate: f64,
    /// κ_a / (ρ κ_a0).
    pub ratio: f64,
    pub relative_rms: f64,
    pub points: Vec<CalibrationPoint>,
}

/// Late-window mean bound count of every run, per release size.
fn simulated_steady_states(
    cfg: &ChannelConfig,
    settings: &CalibrationSettings,
) -> Result<Vec<(f64, f64)>> {
    let (t0, t1) = settings.window;
    if !(t0 >= 0.0 && t1 > t0) {
        return Err(PbsError::parameter("window", "need 0 <= start < end"));
    }
    if settings.runs < 2 {
        return Err(PbsError::parameter("runs", "at least two runs are required"));
    }
    let plan = RunPlan {
        time_step: settings.time_step,
        horizon: t1,
        record_every: Some(settings.sample_every),
        sample_times: vec![],
    };
    let first = (t0 / settings.sample_every).ceil() as usize;
    settings
        .releases
        .iter()
        .enumerate()
        .map(|(p, &n)| {
            let schedule = ReleaseSchedule::single(n);
            let run_means: Vec<f64> = (0..settings.runs)
                .into_par_iter()
                .map(|m| {
                    // each point gets its own block of streams
                    let stream = p as u64 * settings.runs + m;
                    let rec = simulate(cfg, &schedule, &plan, settings.seed, stream)?;
                    let window = &rec.trace[first..];
                    Ok(window.iter().map(|c| c.bound as f64).sum::<f64>() / window.len() as f64)
                })
                .collect::<Result<_>>()?;
            let k = run_means.len() as f64;
            let mean = run_means.iter().sum::<f64>() / k;
            let var = run_means.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0);
            Ok((mean, (var / k).sqrt()))
        })
        .collect()
}

fn equilibrium(cfg: &ChannelConfig, rate: f64, n: u64) -> Result<f64> {
    if rate == 0.0 {
        return Ok(0.0);
    }
    let c = cfg.modified(|s| {
        s.effective_binding_rate = Some(rate);
        s.degradation_rate = Some(0.0);
    })?;
    Ok(steady::steady_state(&c, n as f64)?.bound_equilibrium)
}

/// Golden-section minimization of a unimodal function on `[lo, hi]`.
fn golden_section(mut lo: f64, mut hi: f64, f: impl Fn(f64) -> Result<f64>) -> Result<f64> {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let (mut f1, mut f2) = (f(x1)?, f(x2)?);
    for _ in 0..200 {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = f(x1)?;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = f(x2)?;
        }
        if hi - lo < 1e-12 * hi.max(1e-300) {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Fit κ_a for the geometry and kinetics of `cfg`; degradation is switched off.
pub fn calibrate_homogenization(
    cfg: &ChannelConfig,
    settings: &CalibrationSettings,
) -> Result<CalibrationResult> {
    if settings.releases.is_empty() {
        return Err(PbsError::parameter("releases", "no calibration points"));
    }
    if !(cfg.unbinding_rate() > 0.0) {
        return Err(PbsError::parameter(
            "unbinding_rate",
            "the equilibrium fit needs a positive unbinding rate",
        ));
    }
    let cfg = cfg.modified(|s| s.degradation_rate = Some(0.0))?;
    let simulated = simulated_steady_states(&cfg, settings)?;
    let scale = cfg.receptor_coverage() * cfg.intrinsic_binding_rate();

    let ratio = if simulated.iter().all(|&(m, _)| m == 0.0) || scale == 0.0 {
        0.0
    } else {
        let sse = |h: f64| -> Result<f64> {
            settings
                .releases
                .iter()
                .zip(&simulated)
                .map(|(&n, &(m, _))| Ok((equilibrium(&cfg, h * scale, n)? - m).powi(2)))
                .sum()
        };
        golden_section(0.0, 10.0, sse)?
    };
    let rate = ratio * scale;

    let mut points = Vec::with_capacity(simulated.len());
    let mut rel_sq = 0.0;
    for (&n, &(mean, sem)) in settings.releases.iter().zip(&simulated) {
        let fitted = equilibrium(&cfg, rate, n)?;
        if mean > 0.0 {
            rel_sq += ((fitted - mean) / mean).powi(2);
        }
        points.push(CalibrationPoint {
            releases: n,
            simulated_mean: mean,
            simulated_sem: sem,
            fitted_equilibrium: fitted,
        });
    }
    let relative_rms = (rel_sq / points.len() as f64).sqrt();
    if relative_rms > settings.max_relative_rms {
        return Err(PbsError::Calibration(format!(
            "relative RMS residual {relative_rms:.4} exceeds {}",
            settings.max_relative_rms
        )));
    }
    Ok(CalibrationResult {
        effective_binding_rate: rate,
        ratio,
        relative_rms,
        points,
    })
}
