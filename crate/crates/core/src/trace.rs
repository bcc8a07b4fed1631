//! Sampled solver output and the ISI-free check.

use std::fmt::Write as _;

use crate::config::ReleaseSchedule;
use crate::error::{ModelError, Result};

/// Expected-signal time series sampled every `sample_interval` µs.
#[derive(Clone, Debug, PartialEq)]
pub struct SignalTrace {
    /// T in µs.
    pub sample_interval: f64,
    /// Expected number of bound receptors i(kT).
    pub bound: Vec<f64>,
    /// Solute concentration at the receptor face c(a, kT), 1/µm.
    pub boundary_conc: Vec<f64>,
    /// Expected solute plus bound molecules N(kT) from the degradation ledger.
    pub total_molecules: Vec<f64>,
    /// Solute molecules ∫ c(x, kT) dx, the zeroth expansion coefficient.
    pub solute: Vec<f64>,
}

impl SignalTrace {
    pub fn len(&self) -> usize {
        self.bound.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bound.is_empty()
    }

    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.sample_interval
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len()).map(|k| self.time(k))
    }

    /// Sample index and value of the peak of i(t).
    pub fn peak(&self) -> (usize, f64) {
        self.bound
            .iter()
            .copied()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (k, v)| {
                if v > best.1 {
                    (k, v)
                } else {
                    best
                }
            })
    }

    /// t_max = argmax i(t), µs.
    pub fn peak_time(&self) -> f64 {
        self.time(self.peak().0)
    }

    /// Sample index nearest to `t`, clamped to the trace.
    pub fn index_at(&self, t: f64) -> usize {
        let k = (t / self.sample_interval).round().max(0.0) as usize;
        k.min(self.len().saturating_sub(1))
    }

    /// i(t) at the sample nearest `t`.
    pub fn bound_at(&self, t: f64) -> f64 {
        self.bound[self.index_at(t)]
    }

    /// CSV with header `t,i,c_a,n_total`.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(self.len() * 48);
        out.push_str("t,i,c_a,n_total\n");
        for k in 0..self.len() {
            let _ = writeln!(
                out,
                "{},{},{},{}",
                self.time(k),
                self.bound[k],
                self.boundary_conc[k],
                self.total_molecules[k]
            );
        }
        out
    }

    /// Keep every `stride`-th sample.
    pub fn downsample(&self, stride: usize) -> SignalTrace {
        let stride = stride.max(1);
        let pick = |v: &[f64]| v.iter().step_by(stride).copied().collect::<Vec<_>>();
        SignalTrace {
            sample_interval: self.sample_interval * stride as f64,
            bound: pick(&self.bound),
            boundary_conc: pick(&self.boundary_conc),
            total_molecules: pick(&self.total_molecules),
            solute: pick(&self.solute),
        }
    }
}

/// Whether the cleft is cleared between releases.
///
/// For each release at `T_m`, both the solute molecules and the bound count at
/// `T_m − ε` must be below `tol · N_m`. Instants before the start of the trace
/// count as empty.
pub fn is_isi_free(
    trace: &SignalTrace,
    schedule: &ReleaseSchedule,
    epsilon: f64,
    tol: f64,
) -> Result<bool> {
    if !(epsilon > 0.0) {
        return Err(ModelError::parameter("epsilon", "must be > 0"));
    }
    if let Some(gap) = schedule.min_gap() {
        if epsilon >= gap {
            return Err(ModelError::parameter(
                "epsilon",
                format!("{epsilon} is not below the smallest inter-release gap {gap}"),
            ));
        }
    }
    let horizon = trace.time(trace.len().saturating_sub(1));
    if schedule.last_time() - epsilon > horizon + 1e-9 {
        return Err(ModelError::parameter(
            "trace",
            "does not cover the last release time",
        ));
    }
    for release in schedule.releases() {
        let probe = release.time - epsilon;
        if probe < 0.0 {
            continue;
        }
        // last sample at or before the probe instant
        let k = ((probe / trace.sample_interval) + 1e-9).floor() as usize;
        let k = k.min(trace.len() - 1);
        let limit = tol * release.count as f64;
        let solute = trace.total_molecules[k] - trace.bound[k];
        if solute.abs() >= limit || trace.bound[k].abs() >= limit {
            return Ok(false);
        }
    }
    Ok(true)
}
