//! Figure experiments: sweeps over a base configuration, written as CSV files
//! plus a metadata document that reproduces the run on its own.

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use dmc_core::config::{load_config_value, Config, PbsSettings};
use dmc_core::ssd::{self, BoundaryLaw};
use dmc_core::stats::{self, SweepParameter};
use dmc_core::{steady, SignalTrace};
use dmc_pbs::{ensemble, simulate, RunPlan};

use crate::error::{HarnessError, Result};
use crate::overrides;

/// Spacing of recorded particle-simulation traces, µs.
pub const PBS_RECORD_EVERY: f64 = 1.0;

/// Fraction of the horizon, counted from its end, averaged for steady-state markers.
const LATE_WINDOW: f64 = 1.0 / 3.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExperimentName {
    Fig3,
    Fig4,
    Fig5,
    Fig6,
    Fig7,
    Fig8,
    Degradation,
    Custom,
}

impl ExperimentName {
    pub fn default_outputs(self) -> &'static [OutputKind] {
        match self {
            Self::Fig3 => &[OutputKind::SteadyState],
            Self::Fig4 | Self::Fig5 => &[OutputKind::Traces],
            Self::Fig6 | Self::Fig7 => &[OutputKind::Distributions],
            Self::Fig8 => &[OutputKind::VarianceSweep],
            Self::Degradation => &[OutputKind::DegradationFraction],
            Self::Custom => &[],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputKind {
    /// Exact equilibrium against the scaling-law estimate, per sweep point.
    SteadyState,
    /// Saturating and linear solver traces, with particle means if enabled.
    Traces,
    /// Received-signal PMFs at t_max or at the requested sample times.
    Distributions,
    /// Peak variance for each swept parameter separately.
    VarianceSweep,
    /// Bound fraction i(t)/N(t) with and without saturation.
    DegradationFraction,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub field: String,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub name: ExperimentName,
    /// Base configuration document. Particle runs are enabled when it has a
    /// `pbs` section.
    pub config: Value,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub overrides: Vec<Sweep>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub outputs: Vec<OutputKind>,
    /// Merged into the configuration as its `pbs` section.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pbs: Option<PbsSettings>,
    /// Free-form remarks on where the values come from.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub notes: Option<String>,
}

impl ExperimentSpec {
    /// Parse a spec, or the `spec` member of a metadata document.
    pub fn from_json(text: &str) -> Result<Self> {
        let v: Value = serde_json::from_str(text)
            .map_err(|e| HarnessError::invalid(format!("experiment spec: {e}")))?;
        let v = match v.get("spec") {
            Some(inner) if v.get("config_hash").is_some() => inner.clone(),
            _ => v,
        };
        serde_json::from_value(v).map_err(|e| HarnessError::invalid(format!("experiment spec: {e}")))
    }

    /// Fold `pbs` into the configuration, apply `--set` edits, fill in the
    /// default outputs and check every sweep field and point.
    pub fn resolve(&self, assignments: &[String]) -> Result<Self> {
        let mut config = self.config.clone();
        if let Some(p) = &self.pbs {
            let obj = config
                .as_object_mut()
                .ok_or_else(|| HarnessError::invalid("`config` must be an object"))?;
            obj.insert(
                "pbs".into(),
                serde_json::to_value(p).expect("pbs settings serialize"),
            );
        }
        overrides::apply_all(&mut config, assignments)?;
        let outputs = if self.outputs.is_empty() {
            self.name.default_outputs().to_vec()
        } else {
            self.outputs.clone()
        };
        if outputs.is_empty() {
            return Err(HarnessError::usage("custom experiments must list their outputs"));
        }
        for s in &self.overrides {
            overrides::Field::parse(&s.field)?;
            if s.values.is_empty() {
                return Err(HarnessError::invalid(format!("sweep over `{}` has no values", s.field)));
            }
        }
        let resolved = Self {
            name: self.name,
            config,
            overrides: self.overrides.clone(),
            outputs,
            pbs: None,
            notes: self.notes.clone(),
        };
        resolved.points()?;
        Ok(resolved)
    }

    pub(crate) fn pbs_enabled(&self) -> bool {
        self.config.get("pbs").is_some()
    }

    /// SHA-256 of the serialized spec.
    pub fn hash(&self) -> String {
        let text = serde_json::to_string(self).expect("spec serializes");
        hex::encode(Sha256::digest(text.as_bytes()))
    }

    /// Cartesian product of all sweeps applied to the base configuration.
    pub(crate) fn points(&self) -> Result<Vec<Point>> {
        let mut grid: Vec<Vec<(String, f64)>> = vec![vec![]];
        for s in &self.overrides {
            grid = grid
                .into_iter()
                .flat_map(|prefix| {
                    s.values.iter().map(move |&v| {
                        let mut p = prefix.clone();
                        p.push((s.field.clone(), v));
                        p
                    })
                })
                .collect();
        }
        grid.into_iter()
            .map(|assign| {
                let tag = point_tag(&assign);
                let mut doc = self.config.clone();
                for (k, v) in &assign {
                    overrides::set_number(&mut doc, k, *v).map_err(|e| e.at(&tag))?;
                }
                let config = load_config_value(doc).map_err(|e| HarnessError::from(e).at(&tag))?;
                Ok(Point { tag, config })
            })
            .collect()
    }
}

fn point_tag(assign: &[(String, f64)]) -> String {
    if assign.is_empty() {
        return "base".into();
    }
    assign
        .iter()
        .map(|(k, v)| format!("{}={v}", overrides::Field::parse(k).map(|f| f.name()).unwrap_or(k)))
        .collect::<Vec<_>>()
        .join("_")
}

#[derive(Clone, Debug)]
pub(crate) struct Point {
    pub(crate) tag: String,
    pub(crate) config: Config,
}

/// Named CSV files in a fixed order, plus the metadata document.
#[derive(Clone, Debug, PartialEq)]
pub struct Artifacts {
    pub files: Vec<(String, String)>,
    pub metadata: Value,
}

impl Artifacts {
    pub fn file(&self, name: &str) -> Option<&str> {
        self.files
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, c)| c.as_str())
    }

    /// Write every file and `metadata.json` into `dir`, creating it if needed.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)
            .map_err(|e| HarnessError::io(format!("creating {}", dir.display()), e))?;
        for (name, content) in &self.files {
            let path = dir.join(name);
            std::fs::write(&path, content)
                .map_err(|e| HarnessError::io(format!("writing {}", path.display()), e))?;
        }
        let meta = serde_json::to_string_pretty(&self.metadata).expect("metadata serializes");
        let path = dir.join("metadata.json");
        std::fs::write(&path, meta + "\n")
            .map_err(|e| HarnessError::io(format!("writing {}", path.display()), e))
    }
}

/// Run a spec that has already been through [`ExperimentSpec::resolve`].
pub fn run_experiment(spec: &ExperimentSpec) -> Result<Artifacts> {
    let points = spec.points()?;
    let pbs = spec.pbs_enabled();
    let mut files = Vec::new();
    for kind in &spec.outputs {
        let out = match kind {
            OutputKind::SteadyState => steady_table(&points, pbs)?,
            OutputKind::Traces => traces(&points, pbs)?,
            OutputKind::Distributions => distributions(&points, pbs)?,
            OutputKind::VarianceSweep => variance_sweeps(spec)?,
            OutputKind::DegradationFraction => degradation_fraction(&points, pbs)?,
        };
        files.extend(out);
    }
    let seed = pbs.then(|| points[0].config.pbs.seed);
    let metadata = serde_json::json!({
        "tool": "dmc",
        "version": env!("CARGO_PKG_VERSION"),
        "experiment": spec.name,
        "config_hash": spec.hash(),
        "seed": seed,
        "files": files.iter().map(|(n, _)| n.clone()).collect::<Vec<_>>(),
        "spec": spec,
    });
    Ok(Artifacts { files, metadata })
}

type Files = Vec<(String, String)>;

/// Map points in parallel, keeping their order and naming the failing one.
fn per_point<T: Send>(points: &[Point], f: impl Fn(&Point) -> Result<T> + Sync) -> Result<Vec<T>> {
    points
        .par_iter()
        .map(|p| f(p).map_err(|e| e.at(&p.tag)))
        .collect()
}

fn released(cfg: &Config) -> u64 {
    cfg.schedule.total_released()
}

fn late_pbs_mean(cfg: &Config) -> Result<(f64, f64)> {
    let horizon = cfg.solver.horizon;
    let plan = RunPlan {
        time_step: cfg.pbs.time_step,
        horizon,
        record_every: Some(PBS_RECORD_EVERY),
        sample_times: vec![],
    };
    let first = ((1.0 - LATE_WINDOW) * horizon / PBS_RECORD_EVERY).ceil() as usize;
    let runs = cfg.pbs.runs as u64;
    let means: Vec<f64> = (0..runs)
        .into_par_iter()
        .map(|m| {
            let rec = simulate(&cfg.channel, &cfg.schedule, &plan, cfg.pbs.seed, m)?;
            let w = &rec.trace[first.min(rec.trace.len() - 1)..];
            Ok(w.iter().map(|c| c.bound as f64).sum::<f64>() / w.len() as f64)
        })
        .collect::<Result<_>>()?;
    let k = means.len() as f64;
    let mean = means.iter().sum::<f64>() / k;
    let sem = if means.len() > 1 {
        (means.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0) / k).sqrt()
    } else {
        0.0
    };
    Ok((mean, sem))
}

fn steady_table(points: &[Point], pbs: bool) -> Result<Files> {
    let rows = per_point(points, |p| {
        let ch = &p.config.channel;
        if ch.degradation_rate() != 0.0 {
            return Err(HarnessError::invalid(
                "steady-state tables need degradation_rate = 0",
            ));
        }
        let n = released(&p.config);
        let exact = steady::steady_state(ch, n as f64)?.bound_equilibrium;
        let scaled = steady::steady_state_scaled(ch, 2 * n, n)?;
        let marker = if pbs { Some(late_pbs_mean(&p.config)?) } else { None };
        Ok((n, ch.receptor_count(), exact, scaled, marker))
    })?;
    let mut csv = String::from("point,release_count,receptor_count,i_exact,i_scaled,rel_dev");
    csv.push_str(if pbs { ",i_pbs,i_pbs_sem\n" } else { "\n" });
    for (p, (n, c, exact, scaled, marker)) in points.iter().zip(rows) {
        let dev = if exact > 0.0 { (scaled - exact).abs() / exact } else { 0.0 };
        let _ = write!(csv, "{},{n},{c},{exact},{scaled},{dev}", p.tag);
        match marker {
            Some((m, s)) => {
                let _ = writeln!(csv, ",{m},{s}");
            }
            None => csv.push('\n'),
        }
    }
    Ok(vec![("steady_state.csv".into(), csv)])
}

/// Peak of i(t) on `[t0, t1)`.
fn window_peak(trace: &SignalTrace, t0: f64, t1: f64) -> (f64, f64) {
    let eps = 1e-9 * trace.sample_interval;
    trace
        .times()
        .zip(&trace.bound)
        .filter(|(t, _)| *t >= t0 - eps && *t < t1 - eps)
        .fold((t0, f64::NEG_INFINITY), |b, (t, &v)| if v > b.1 { (t, v) } else { b })
}

fn traces(points: &[Point], pbs: bool) -> Result<Files> {
    let runs = per_point(points, |p| {
        let c = &p.config;
        let sat = ssd::run(&c.channel, &c.schedule, &c.solver)?;
        let lin = ssd::run_linear_reference(&c.channel, &c.schedule, &c.solver)?;
        let particles = if pbs {
            let plan = RunPlan {
                time_step: c.pbs.time_step,
                horizon: c.solver.horizon,
                record_every: Some(PBS_RECORD_EVERY),
                sample_times: vec![],
            };
            Some(ensemble(&c.channel, &c.schedule, &plan, c.pbs.runs as u64, c.pbs.seed)?)
        } else {
            None
        };
        Ok((sat, lin, particles))
    })?;
    let mut files = Files::new();
    let mut summary = String::from("point,release,t_peak,i_peak,t_peak_linear,i_peak_linear\n");
    for (p, (sat, lin, particles)) in points.iter().zip(runs) {
        let starts: Vec<f64> = p.config.schedule.releases().iter().map(|r| r.time).collect();
        for (m, &t0) in starts.iter().enumerate() {
            let t1 = starts.get(m + 1).copied().unwrap_or(f64::INFINITY);
            let (ts, is) = window_peak(&sat, t0, t1);
            let (tl, il) = window_peak(&lin, t0, t1);
            let _ = writeln!(summary, "{},{m},{},{is},{},{il}", p.tag, clean_time(ts), clean_time(tl));
        }
        files.push((format!("ssd_{}.csv", p.tag), sat.to_csv()));
        files.push((format!("linear_{}.csv", p.tag), lin.to_csv()));
        if let Some(e) = particles {
            files.push((format!("pbs_{}.csv", p.tag), e.trace_csv()));
        }
    }
    files.push(("peaks.csv".into(), summary));
    Ok(files)
}

/// Round to a nanosecond grid so times print without float noise.
pub(crate) fn clean_time(t: f64) -> f64 {
    (t * 1e9).round() / 1e9
}

fn distributions(points: &[Point], pbs: bool) -> Result<Files> {
    let per = per_point(points, |p| {
        let c = &p.config;
        let n = released(c);
        let cap = c.channel.receptor_count();
        let trace = ssd::run(&c.channel, &c.schedule, &c.solver)?;
        let times: Vec<f64> = if c.pbs.sample_times.is_empty() {
            vec![clean_time(trace.peak_time())]
        } else {
            c.pbs.sample_times.clone()
        };
        let horizon = trace.time(trace.len() - 1);
        if let Some(t) = times.iter().find(|&&t| t > horizon + 1e-9) {
            return Err(HarnessError::invalid(format!(
                "sample time {t} lies beyond the solver horizon {horizon}"
            )));
        }
        let empirical = if pbs {
            let plan = RunPlan {
                time_step: c.pbs.time_step,
                horizon: times.iter().copied().fold(0.0, f64::max),
                record_every: None,
                sample_times: times.clone(),
            };
            let e = ensemble(&c.channel, &c.schedule, &plan, c.pbs.runs as u64, c.pbs.seed)?;
            e.histograms
                .iter()
                .map(|h| h.to_distribution().map_err(HarnessError::from))
                .collect::<Result<Vec<_>>>()?
                .into_iter()
                .map(Some)
                .collect()
        } else {
            vec![None; times.len()]
        };
        times
            .iter()
            .zip(empirical)
            .map(|(&t, emp)| {
                let i = trace.bound_at(t);
                let h = stats::hypergeom_from_mean(n, cap, i)?;
                let (bn, bc) = stats::binomial_comparators(n, cap, i)?;
                Ok((t, i, h, bn, bc, emp))
            })
            .collect::<Result<Vec<_>>>()
    })?;

    let mut files = Files::new();
    let mut tv = String::from(
        "point,t,i,var_hypergeom,mean_pbs,var_pbs,tv_hypergeom,tv_binom_n,tv_binom_c\n",
    );
    for (p, rows) in points.iter().zip(per) {
        for (t, i, h, bn, bc, emp) in rows {
            let hi = [&h, &bn, &bc]
                .iter()
                .map(|d| d.support().1)
                .chain(emp.as_ref().map(|e| e.support().1))
                .max()
                .unwrap_or(0);
            let mut csv = String::from(if emp.is_some() {
                "n,hypergeom,binom_n,binom_c,pbs\n"
            } else {
                "n,hypergeom,binom_n,binom_c\n"
            });
            for k in 0..=hi {
                let _ = write!(csv, "{k},{},{},{}", h.pmf_at(k), bn.pmf_at(k), bc.pmf_at(k));
                match &emp {
                    Some(e) => {
                        let _ = writeln!(csv, ",{}", e.pmf_at(k));
                    }
                    None => csv.push('\n'),
                }
            }
            files.push((format!("pmf_{}_t={t}.csv", p.tag), csv));
            let _ = write!(tv, "{},{t},{i},{}", p.tag, h.variance());
            match &emp {
                Some(e) => {
                    let _ = writeln!(
                        tv,
                        ",{},{},{},{},{}",
                        e.mean(),
                        e.variance(),
                        stats::total_variation(e, &h),
                        stats::total_variation(e, &bn),
                        stats::total_variation(e, &bc)
                    );
                }
                None => tv.push_str(",,,,,\n"),
            }
        }
    }
    files.push(("tv.csv".into(), tv));
    Ok(files)
}

fn sweep_parameter(field: &str) -> Result<SweepParameter> {
    match overrides::Field::parse(field)?.name() {
        "receptor_count" => Ok(SweepParameter::ReceptorCount),
        "release_count" => Ok(SweepParameter::ReleaseCount),
        "intrinsic_binding_rate" => Ok(SweepParameter::IntrinsicBindingRate),
        other => Err(HarnessError::usage(format!(
            "variance sweeps support receptor_count, release_count and intrinsic_binding_rate, not `{other}`"
        ))),
    }
}

fn variance_sweeps(spec: &ExperimentSpec) -> Result<Files> {
    let base = load_config_value(spec.config.clone())?;
    if base.schedule.len() != 1 {
        return Err(HarnessError::invalid("variance sweeps need a single release"));
    }
    spec.overrides
        .iter()
        .map(|s| {
            let param = sweep_parameter(&s.field)?;
            let rows = stats::variance_sweep(
                &base.channel,
                released(&base),
                &base.solver,
                param,
                &s.values,
            )
            .map_err(|e| HarnessError::from(e).at(param.name()))?;
            Ok((format!("variance_{}.csv", param.name()), stats::sweep_to_csv(&rows)))
        })
        .collect()
}

/// i(t)/N(t) from a solver trace, N(t) being solute plus bound molecules.
pub fn bound_fraction(trace: &SignalTrace) -> Vec<f64> {
    trace
        .bound
        .iter()
        .zip(&trace.solute)
        .map(|(&i, &s)| if i + s > 0.0 { i / (i + s) } else { 0.0 })
        .collect()
}

fn degradation_fraction(points: &[Point], pbs: bool) -> Result<Files> {
    let per = per_point(points, |p| {
        let c = &p.config;
        let sat = ssd::run_with_law(&c.channel, &c.schedule, &c.solver, BoundaryLaw::Saturating)?;
        let lin = ssd::run_with_law(&c.channel, &c.schedule, &c.solver, BoundaryLaw::Linear)?;
        let particles = if pbs {
            let plan = RunPlan {
                time_step: c.pbs.time_step,
                horizon: c.solver.horizon,
                record_every: Some(PBS_RECORD_EVERY),
                sample_times: vec![],
            };
            Some(ensemble(&c.channel, &c.schedule, &plan, c.pbs.runs as u64, c.pbs.seed)?)
        } else {
            None
        };
        Ok((sat, lin, particles))
    })?;
    let mut files = Files::new();
    for (p, (sat, lin, particles)) in points.iter().zip(per) {
        let (fs, fl) = (bound_fraction(&sat), bound_fraction(&lin));
        let mut csv = String::from("t,fraction,fraction_linear\n");
        for (k, t) in sat.times().enumerate() {
            let _ = writeln!(csv, "{t},{},{}", fs[k], fl[k]);
        }
        files.push((format!("fraction_{}.csv", p.tag), csv));
        if let Some(e) = particles {
            let mut csv = String::from("t,fraction\n");
            for (k, t) in e.times.iter().enumerate() {
                let f = if e.total_mean[k] > 0.0 { e.bound_mean[k] / e.total_mean[k] } else { 0.0 };
                let _ = writeln!(csv, "{t},{f}");
            }
            files.push((format!("fraction_pbs_{}.csv", p.tag), csv));
        }
    }
    Ok(files)
}
