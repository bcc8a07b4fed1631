//! Single runs and seed-ordered ensembles.

use rayon::prelude::*;
use serde::Serialize;

use dmc_core::config::{ChannelConfig, ReleaseSchedule};
use dmc_core::stats::Histogram;

use crate::error::{PbsError, Result};
use crate::world::{Counts, World};

/// What to record from each run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunPlan {
    pub time_step: f64,
    /// Last simulated time, µs.
    pub horizon: f64,
    /// Record counts every `record_every` µs, starting at t = 0. `None` keeps
    /// no trace.
    pub record_every: Option<f64>,
    /// Instants at which bound-count histograms are collected, µs.
    pub sample_times: Vec<f64>,
}

impl RunPlan {
    fn steps(&self, t: f64, name: &'static str) -> Result<u64> {
        let k = t / self.time_step;
        let r = k.round();
        if !(r >= 0.0) || (k - r).abs() > 1e-6 * k.abs().max(1.0) {
            return Err(PbsError::parameter(
                name,
                format!("{t} µs is not a multiple of the time step {}", self.time_step),
            ));
        }
        Ok(r as u64)
    }

    fn horizon_steps(&self) -> Result<u64> {
        self.steps(self.horizon, "horizon")
    }

    fn record_stride(&self) -> Result<Option<u64>> {
        match self.record_every {
            None => Ok(None),
            Some(dt) => {
                let s = self.steps(dt, "record_every")?;
                if s == 0 {
                    return Err(PbsError::parameter("record_every", "must be > 0"));
                }
                Ok(Some(s))
            }
        }
    }

    fn sample_steps(&self) -> Result<Vec<u64>> {
        self.sample_times
            .iter()
            .map(|&t| self.steps(t, "sample_times"))
            .collect()
    }
}

/// Counts recorded during one run.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunRecord {
    pub trace: Vec<Counts>,
    /// Bound count at each requested sample time.
    pub samples: Vec<u32>,
}

/// One realization with receptor layout and motion drawn from stream `run_index` of `seed`.
pub fn simulate(
    cfg: &ChannelConfig,
    schedule: &ReleaseSchedule,
    plan: &RunPlan,
    seed: u64,
    run_index: u64,
) -> Result<RunRecord> {
    let horizon = plan.horizon_steps()?;
    if (horizon as f64) * plan.time_step + 1e-9 < schedule.last_time() {
        return Err(PbsError::parameter(
            "horizon",
            "ends before the last release",
        ));
    }
    let stride = plan.record_stride()?;
    let sample_steps = plan.sample_steps()?;
    if let Some(&s) = sample_steps.iter().find(|&&s| s > horizon) {
        return Err(PbsError::parameter(
            "sample_times",
            format!("step {s} lies beyond the horizon"),
        ));
    }

    let mut world = World::new(cfg, schedule, plan.time_step, seed, run_index)?;
    let mut rec = RunRecord {
        trace: Vec::with_capacity(stride.map_or(0, |s| (horizon / s + 1) as usize)),
        samples: vec![0; sample_steps.len()],
    };
    loop {
        let k = world.step_index();
        if stride.is_some_and(|s| k % s == 0) {
            rec.trace.push(world.counts());
        }
        for (slot, &s) in rec.samples.iter_mut().zip(&sample_steps) {
            if s == k {
                *slot = world.counts().bound;
            }
        }
        if k == horizon {
            break;
        }
        world.advance();
    }
    debug_assert!(world.solute_inside());
    Ok(rec)
}

/// Ensemble statistics, reduced in run order.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EnsembleResult {
    pub seed: u64,
    pub runs: u64,
    pub time_step: f64,
    pub times: Vec<f64>,
    pub bound_mean: Vec<f64>,
    /// Sample standard deviation across runs.
    pub bound_std: Vec<f64>,
    /// Mean of solute plus bound molecules.
    pub total_mean: Vec<f64>,
    pub sample_times: Vec<f64>,
    pub histograms: Vec<Histogram>,
}

impl EnsembleResult {
    /// Standard error of the mean bound count at record `k`.
    pub fn bound_sem(&self, k: usize) -> f64 {
        self.bound_std[k] / (self.runs as f64).sqrt()
    }

    /// CSV with header `t,i_mean,i_std`.
    pub fn trace_csv(&self) -> String {
        let mut out = String::from("t,i_mean,i_std\n");
        for k in 0..self.times.len() {
            out.push_str(&format!(
                "{},{},{}\n",
                self.times[k], self.bound_mean[k], self.bound_std[k]
            ));
        }
        out
    }

    /// CSV with header `n,count` for the histogram at sample `j`.
    pub fn histogram_csv(&self, j: usize) -> String {
        let mut out = String::from("n,count\n");
        for (n, c) in self.histograms[j].counts.iter().enumerate() {
            out.push_str(&format!("{n},{c}\n"));
        }
        out
    }
}

/// Run `runs` independent realizations in parallel.
///
/// Run `m` uses stream `m` of `seed`; the reduction visits runs in index
/// order, so the result does not depend on the thread count.
pub fn ensemble(
    cfg: &ChannelConfig,
    schedule: &ReleaseSchedule,
    plan: &RunPlan,
    runs: u64,
    seed: u64,
) -> Result<EnsembleResult> {
    if runs < 1 {
        return Err(PbsError::parameter("runs", "at least one run is required"));
    }
    let records: Vec<RunRecord> = (0..runs)
        .into_par_iter()
        .map(|m| simulate(cfg, schedule, plan, seed, m))
        .collect::<Result<_>>()?;

    let len = records[0].trace.len();
    let n = runs as f64;
    let mut sum = vec![0.0; len];
    let mut sum_total = vec![0.0; len];
    for r in &records {
        for (k, c) in r.trace.iter().enumerate() {
            sum[k] += c.bound as f64;
            sum_total[k] += (c.bound + c.solute) as f64;
        }
    }
    let bound_mean: Vec<f64> = sum.iter().map(|s| s / n).collect();
    let mut sq = vec![0.0; len];
    for r in &records {
        for (k, c) in r.trace.iter().enumerate() {
            sq[k] += (c.bound as f64 - bound_mean[k]).powi(2);
        }
    }
    let bound_std = sq
        .iter()
        .map(|s| if runs > 1 { (s / (n - 1.0)).sqrt() } else { 0.0 })
        .collect();
    let mut histograms = vec![Histogram::default(); plan.sample_times.len()];
    for r in &records {
        for (h, &v) in histograms.iter_mut().zip(&r.samples) {
            h.add(v as u64);
        }
    }
    let every = plan.record_every.unwrap_or(0.0);
    Ok(EnsembleResult {
        seed,
        runs,
        time_step: plan.time_step,
        times: (0..len).map(|k| k as f64 * every).collect(),
        bound_mean,
        bound_std,
        total_mean: sum_total.iter().map(|s| s / n).collect(),
        sample_times: plan.sample_times.clone(),
        histograms,
    })
}
