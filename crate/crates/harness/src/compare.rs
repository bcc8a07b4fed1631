//! Pairwise comparison of models on the points of an experiment spec.
//!
//! Trace models (`ssd`, `linear`, `steady`, `pbs`) are compared by their
//! largest deviation relative to the larger peak; `steady` against a trace
//! uses the last sample. Distribution models (`hypergeom`, `binomN`,
//! `binomC`, `pbs`) are compared by total-variation distance at t_max or at
//! the configured sample times. `pbs` takes the role of the other models.

use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

use dmc_core::config::Config;
use dmc_core::ssd;
use dmc_core::stats::{self, ReceivedSignalDistribution};
use dmc_core::steady;
use dmc_pbs::{ensemble, RunPlan};

use crate::error::{HarnessError, Result};
use crate::experiment::{clean_time, ExperimentSpec, PBS_RECORD_EVERY};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum Model {
    #[serde(rename = "ssd")]
    Ssd,
    #[serde(rename = "linear")]
    Linear,
    #[serde(rename = "steady")]
    Steady,
    #[serde(rename = "hypergeom")]
    Hypergeom,
    #[serde(rename = "binomN")]
    BinomN,
    #[serde(rename = "binomC")]
    BinomC,
    #[serde(rename = "pbs")]
    Pbs,
}

impl FromStr for Model {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "ssd" => Self::Ssd,
            "linear" => Self::Linear,
            "steady" => Self::Steady,
            "hypergeom" => Self::Hypergeom,
            "binomN" => Self::BinomN,
            "binomC" => Self::BinomC,
            "pbs" => Self::Pbs,
            _ => {
                return Err(HarnessError::usage(format!(
                    "unknown model `{s}`; expected ssd, linear, steady, hypergeom, binomN, binomC or pbs"
                )))
            }
        })
    }
}

impl Model {
    fn is_distribution(self) -> bool {
        matches!(self, Self::Hypergeom | Self::BinomN | Self::BinomC)
    }

    fn is_trace(self) -> bool {
        matches!(self, Self::Ssd | Self::Linear | Self::Steady)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PairMetric {
    pub a: Model,
    pub b: Model,
    pub metric: &'static str,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PointReport {
    pub point: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
    pub pairs: Vec<PairMetric>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ComparisonReport {
    pub models: Vec<Model>,
    pub points: Vec<PointReport>,
}

impl ComparisonReport {
    pub fn metric(&self, point: usize, a: Model, b: Model) -> Option<f64> {
        self.points.get(point)?.pairs.iter().find_map(|p| {
            ((p.a, p.b) == (a, b) || (p.a, p.b) == (b, a)).then_some(p.value)
        })
    }
}

/// Compare `models` pairwise on every point of a resolved spec.
pub fn compare(models: &[Model], spec: &ExperimentSpec) -> Result<ComparisonReport> {
    let mut models = models.to_vec();
    models.sort();
    models.dedup();
    if models.len() < 2 {
        return Err(HarnessError::usage("compare needs at least two distinct models"));
    }
    let dist = models.iter().any(|m| m.is_distribution());
    if dist && models.iter().any(|m| m.is_trace()) {
        return Err(HarnessError::usage(
            "trace models (ssd, linear, steady) cannot be compared with distributions (hypergeom, binomN, binomC)",
        ));
    }
    let points = spec.points()?;
    let reports: Vec<Vec<PointReport>> = points
        .par_iter()
        .map(|p| {
            let r = if dist {
                compare_distributions(&models, &p.config, &p.tag)
            } else {
                compare_traces(&models, &p.config, &p.tag).map(|r| vec![r])
            };
            r.map_err(|e| e.at(&p.tag))
        })
        .collect::<Result<_>>()?;
    Ok(ComparisonReport {
        models,
        points: reports.into_iter().flatten().collect(),
    })
}

enum Signal {
    Trace(Vec<(f64, f64)>),
    Level(f64),
}

fn pbs_ensemble(cfg: &Config, plan: &RunPlan) -> Result<dmc_pbs::EnsembleResult> {
    Ok(ensemble(&cfg.channel, &cfg.schedule, plan, cfg.pbs.runs as u64, cfg.pbs.seed)?)
}

fn compare_traces(models: &[Model], cfg: &Config, tag: &str) -> Result<PointReport> {
    let with_times = |t: &dmc_core::SignalTrace| t.times().zip(t.bound.iter().copied()).collect();
    let signals = models
        .iter()
        .map(|&m| {
            Ok(match m {
                Model::Ssd => Signal::Trace(with_times(&ssd::run(&cfg.channel, &cfg.schedule, &cfg.solver)?)),
                Model::Linear => Signal::Trace(with_times(&ssd::run_linear_reference(
                    &cfg.channel,
                    &cfg.schedule,
                    &cfg.solver,
                )?)),
                Model::Steady => Signal::Level(
                    steady::steady_state(&cfg.channel, cfg.schedule.total_released() as f64)?
                        .bound_equilibrium,
                ),
                Model::Pbs => {
                    let plan = RunPlan {
                        time_step: cfg.pbs.time_step,
                        horizon: cfg.solver.horizon,
                        record_every: Some(PBS_RECORD_EVERY),
                        sample_times: vec![],
                    };
                    let e = pbs_ensemble(cfg, &plan)?;
                    Signal::Trace(e.times.iter().copied().zip(e.bound_mean).collect())
                }
                _ => unreachable!("distribution models are filtered out"),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut pairs = Vec::new();
    for x in 0..models.len() {
        for y in x + 1..models.len() {
            let (metric, value) = match (&signals[x], &signals[y]) {
                (Signal::Trace(a), Signal::Trace(b)) => ("max_rel_dev", max_rel_dev(a, b)),
                (Signal::Trace(tr), Signal::Level(l)) | (Signal::Level(l), Signal::Trace(tr)) => {
                    let last = tr.last().map_or(0.0, |p| p.1);
                    ("late_rel_dev", rel(last, *l))
                }
                (Signal::Level(a), Signal::Level(b)) => ("rel_dev", rel(*a, *b)),
            };
            pairs.push(PairMetric { a: models[x], b: models[y], metric, value });
        }
    }
    Ok(PointReport { point: tag.to_string(), t: None, pairs })
}

fn rel(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

/// Largest |a − b| over the times of the sparser trace, relative to the larger peak.
fn max_rel_dev(a: &[(f64, f64)], b: &[(f64, f64)]) -> f64 {
    let (sparse, dense) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    let step = if dense.len() > 1 { dense[1].0 - dense[0].0 } else { 1.0 };
    let at = |t: f64| {
        let k = ((t - dense[0].0) / step).round().max(0.0) as usize;
        dense[k.min(dense.len() - 1)].1
    };
    let peak = a.iter().chain(b).map(|p| p.1.abs()).fold(0.0, f64::max);
    if peak == 0.0 {
        return 0.0;
    }
    sparse.iter().map(|&(t, v)| (v - at(t)).abs()).fold(0.0, f64::max) / peak
}

fn compare_distributions(models: &[Model], cfg: &Config, tag: &str) -> Result<Vec<PointReport>> {
    let n = cfg.schedule.total_released();
    let cap = cfg.channel.receptor_count();
    let trace = ssd::run(&cfg.channel, &cfg.schedule, &cfg.solver)?;
    let times: Vec<f64> = if cfg.pbs.sample_times.is_empty() {
        vec![clean_time(trace.peak_time())]
    } else {
        cfg.pbs.sample_times.clone()
    };
    let empirical = if models.contains(&Model::Pbs) {
        let plan = RunPlan {
            time_step: cfg.pbs.time_step,
            horizon: times.iter().copied().fold(0.0, f64::max),
            record_every: None,
            sample_times: times.clone(),
        };
        let e = pbs_ensemble(cfg, &plan)?;
        e.histograms
            .iter()
            .map(|h| Ok(Some(h.to_distribution()?)))
            .collect::<Result<Vec<_>>>()?
    } else {
        vec![None; times.len()]
    };
    times
        .iter()
        .zip(empirical)
        .map(|(&t, emp)| {
            let i = trace.bound_at(t);
            let (bn, bc) = stats::binomial_comparators(n, cap, i)?;
            let h = stats::hypergeom_from_mean(n, cap, i)?;
            let pick = |m: Model| -> &ReceivedSignalDistribution {
                match m {
                    Model::Hypergeom => &h,
                    Model::BinomN => &bn,
                    Model::BinomC => &bc,
                    Model::Pbs => emp.as_ref().expect("simulated when requested"),
                    _ => unreachable!("trace models are rejected"),
                }
            };
            let mut pairs = Vec::new();
            for x in 0..models.len() {
                for y in x + 1..models.len() {
                    pairs.push(PairMetric {
                        a: models[x],
                        b: models[y],
                        metric: "tv",
                        value: stats::total_variation(pick(models[x]), pick(models[y])),
                    });
                }
            }
            Ok(PointReport { point: tag.to_string(), t: Some(t), pairs })
        })
        .collect()
}
