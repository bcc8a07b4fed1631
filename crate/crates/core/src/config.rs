//! Channel parameterization and configuration ingestion.
//!
//! All lengths are in µm and all times in µs. Concentrations along the
//! one-dimensional channel axis are in 1/µm. The channel occupies
//! `0 ≤ x ≤ a`; the presynaptic membrane sits at `x = 0` and the receptor
//! face at `x = a`. The transverse extents `y`, `z` start at zero.
//!
//! A configuration document is JSON:
//!
//! ```json
//! {
//!   "channel": {
//!     "diffusion_coeff": 3.3e-4,
//!     "channel_width_x": 0.02,
//!     "channel_width_y": 0.15,
//!     "channel_width_z": 0.15,
//!     "intrinsic_binding_rate": 1.02e-4,
//!     "unbinding_rate": 8.5e-3,
//!     "degradation_rate": 1e-3,
//!     "receptor_count": 203,
//!     "receptor_radius": 2.3e-3
//!   },
//!   "releases": [{ "time": 0.0, "count": 1000 }],
//!   "solver": { "eigenmodes": 100, "sample_interval": 0.1, "horizon": 1000.0 },
//!   "pbs": { "time_step": 0.01, "runs": 150, "seed": 1 }
//! }
//! ```
//!
//! `receptor_coverage`, `effective_binding_rate` and `homogenization_factor`
//! are optional in `channel`. A missing coverage is derived from the receptor
//! count, radius and face area; a supplied one must agree with it. A missing
//! effective binding rate is derived as
//! `homogenization_factor · coverage · intrinsic_binding_rate` with the factor
//! defaulting to [`DEFAULT_HOMOGENIZATION_FACTOR`].

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{ModelError, Result};

/// Ratio `κ_a / (ρ κ_a0)` fitted from particle simulations of the default
/// geometry.
pub const DEFAULT_HOMOGENIZATION_FACTOR: f64 = 0.995;

/// Relative tolerance for a supplied coverage against the derived one.
pub const COVERAGE_CONSISTENCY_TOL: f64 = 1e-9;

pub const DEFAULT_EIGENMODES: usize = 100;
pub const DEFAULT_SAMPLE_INTERVAL: f64 = 0.1;
pub const DEFAULT_PBS_TIME_STEP: f64 = 0.01;

/// Channel description exactly as written in a configuration document.
///
/// Every field is optional at this level so that ingestion can name the
/// missing one; [`ChannelConfig::from_spec`] enforces what is required.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSpec {
    /// µm²/µs
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diffusion_coeff: Option<f64>,
    /// µm
    #[serde(skip_serializing_if = "Option::is_none")]
    pub channel_width_x: Option<f64>,
    /// µm
    #[serde(skip_serializing_if = "Option::is_none")]
    pub channel_width_y: Option<f64>,
    /// µm
    #[serde(skip_serializing_if = "Option::is_none")]
    pub channel_width_z: Option<f64>,
    /// µm/µs
    #[serde(skip_serializing_if = "Option::is_none")]
    pub intrinsic_binding_rate: Option<f64>,
    /// µm/µs
    #[serde(skip_serializing_if = "Option::is_none")]
    pub effective_binding_rate: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub homogenization_factor: Option<f64>,
    /// 1/µs
    #[serde(skip_serializing_if = "Option::is_none")]
    pub unbinding_rate: Option<f64>,
    /// 1/µs, the product of enzyme rate and enzyme concentration.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub degradation_rate: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub receptor_count: Option<i64>,
    /// µm
    #[serde(skip_serializing_if = "Option::is_none")]
    pub receptor_radius: Option<f64>,
    /// Fraction of the receptor face covered by receptors.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub receptor_coverage: Option<f64>,
}

impl ChannelSpec {
    /// Default parameter set of the reference synapse.
    pub fn reference() -> Self {
        Self {
            diffusion_coeff: Some(3.3e-4),
            channel_width_x: Some(2e-2),
            channel_width_y: Some(0.15),
            channel_width_z: Some(0.15),
            intrinsic_binding_rate: Some(1.02e-4),
            effective_binding_rate: None,
            homogenization_factor: None,
            unbinding_rate: Some(8.5e-3),
            degradation_rate: Some(1e-3),
            receptor_count: Some(203),
            receptor_radius: Some(2.3e-3),
            receptor_coverage: None,
        }
    }
}

/// Validated physical parameterization of the synaptic channel.
#[derive(Clone, Debug)]
pub struct ChannelConfig {
    diffusion_coeff: f64,
    width_x: f64,
    width_y: f64,
    width_z: f64,
    intrinsic_binding_rate: f64,
    effective_binding_rate: f64,
    unbinding_rate: f64,
    degradation_rate: f64,
    receptor_count: u64,
    receptor_radius: f64,
    receptor_coverage: f64,
    source: ChannelSpec,
}

impl PartialEq for ChannelConfig {
    fn eq(&self, other: &Self) -> bool {
        self.diffusion_coeff == other.diffusion_coeff
            && self.width_x == other.width_x
            && self.width_y == other.width_y
            && self.width_z == other.width_z
            && self.intrinsic_binding_rate == other.intrinsic_binding_rate
            && self.effective_binding_rate == other.effective_binding_rate
            && self.unbinding_rate == other.unbinding_rate
            && self.degradation_rate == other.degradation_rate
            && self.receptor_count == other.receptor_count
            && self.receptor_radius == other.receptor_radius
            && self.receptor_coverage == other.receptor_coverage
    }
}

fn required(value: Option<f64>, field: &'static str) -> Result<f64> {
    let v = value.ok_or(ModelError::MissingField(field))?;
    if !v.is_finite() {
        return Err(ModelError::invalid(field, "must be finite"));
    }
    Ok(v)
}

fn positive(v: f64, field: &'static str) -> Result<f64> {
    if v > 0.0 {
        Ok(v)
    } else {
        Err(ModelError::invalid(field, format!("must be > 0, got {v}")))
    }
}

fn nonnegative(v: f64, field: &'static str) -> Result<f64> {
    if v >= 0.0 {
        Ok(v)
    } else {
        Err(ModelError::invalid(field, format!("must be >= 0, got {v}")))
    }
}

/// Fraction of a `width_y × width_z` face covered by `count` disks of `radius`.
pub fn coverage_of(count: u64, radius: f64, width_y: f64, width_z: f64) -> f64 {
    count as f64 * PI * radius * radius / (width_y * width_z)
}

impl ChannelConfig {
    pub fn reference() -> Self {
        Self::from_spec(ChannelSpec::reference()).expect("default parameters are valid")
    }

    pub fn from_spec(spec: ChannelSpec) -> Result<Self> {
        let diffusion_coeff = positive(
            required(spec.diffusion_coeff, "diffusion_coeff")?,
            "diffusion_coeff",
        )?;
        let width_x = positive(
            required(spec.channel_width_x, "channel_width_x")?,
            "channel_width_x",
        )?;
        let width_y = positive(
            required(spec.channel_width_y, "channel_width_y")?,
            "channel_width_y",
        )?;
        let width_z = positive(
            required(spec.channel_width_z, "channel_width_z")?,
            "channel_width_z",
        )?;
        let intrinsic_binding_rate = nonnegative(
            required(spec.intrinsic_binding_rate, "intrinsic_binding_rate")?,
            "intrinsic_binding_rate",
        )?;
        let unbinding_rate = nonnegative(
            required(spec.unbinding_rate, "unbinding_rate")?,
            "unbinding_rate",
        )?;
        let degradation_rate = nonnegative(
            required(spec.degradation_rate, "degradation_rate")?,
            "degradation_rate",
        )?;
        let receptor_count = spec
            .receptor_count
            .ok_or(ModelError::MissingField("receptor_count"))?;
        if receptor_count < 1 {
            return Err(ModelError::invalid(
                "receptor_count",
                format!("must be >= 1, got {receptor_count}"),
            ));
        }
        let receptor_count = receptor_count as u64;
        let receptor_radius = positive(
            required(spec.receptor_radius, "receptor_radius")?,
            "receptor_radius",
        )?;

        let derived = coverage_of(receptor_count, receptor_radius, width_y, width_z);
        let receptor_coverage = match spec.receptor_coverage {
            Some(supplied) => {
                if !supplied.is_finite() {
                    return Err(ModelError::invalid("receptor_coverage", "must be finite"));
                }
                if ((supplied - derived) / derived).abs() > COVERAGE_CONSISTENCY_TOL {
                    return Err(ModelError::invalid(
                        "receptor_coverage",
                        format!(
                            "{supplied} disagrees with {derived} implied by receptor_count, \
                             receptor_radius and the face area"
                        ),
                    ));
                }
                supplied
            }
            None => derived,
        };
        if !(receptor_coverage > 0.0 && receptor_coverage <= 1.0) {
            return Err(ModelError::invalid(
                "receptor_coverage",
                format!("must lie in (0, 1], got {receptor_coverage}"),
            ));
        }

        let effective_binding_rate = match spec.effective_binding_rate {
            Some(v) => {
                if !v.is_finite() {
                    return Err(ModelError::invalid(
                        "effective_binding_rate",
                        "must be finite",
                    ));
                }
                nonnegative(v, "effective_binding_rate")?
            }
            None => {
                let factor = match spec.homogenization_factor {
                    Some(f) if f.is_finite() => positive(f, "homogenization_factor")?,
                    Some(_) => {
                        return Err(ModelError::invalid(
                            "homogenization_factor",
                            "must be finite",
                        ))
                    }
                    None => DEFAULT_HOMOGENIZATION_FACTOR,
                };
                factor * receptor_coverage * intrinsic_binding_rate
            }
        };

        Ok(Self {
            diffusion_coeff,
            width_x,
            width_y,
            width_z,
            intrinsic_binding_rate,
            effective_binding_rate,
            unbinding_rate,
            degradation_rate,
            receptor_count,
            receptor_radius,
            receptor_coverage,
            source: spec,
        })
    }

    /// Re-validate after editing the spec this config was built from.
    ///
    /// Derived quantities that were not supplied originally are derived again,
    /// so e.g. changing the receptor count also updates the coverage.
    pub fn modified(&self, edit: impl FnOnce(&mut ChannelSpec)) -> Result<Self> {
        let mut spec = self.source.clone();
        edit(&mut spec);
        Self::from_spec(spec)
    }

    /// The spec as originally supplied.
    pub fn source(&self) -> &ChannelSpec {
        &self.source
    }

    /// A spec with every derived quantity written out.
    pub fn to_spec(&self) -> ChannelSpec {
        ChannelSpec {
            diffusion_coeff: Some(self.diffusion_coeff),
            channel_width_x: Some(self.width_x),
            channel_width_y: Some(self.width_y),
            channel_width_z: Some(self.width_z),
            intrinsic_binding_rate: Some(self.intrinsic_binding_rate),
            effective_binding_rate: Some(self.effective_binding_rate),
            homogenization_factor: None,
            unbinding_rate: Some(self.unbinding_rate),
            degradation_rate: Some(self.degradation_rate),
            receptor_count: Some(self.receptor_count as i64),
            receptor_radius: Some(self.receptor_radius),
            receptor_coverage: Some(self.receptor_coverage),
        }
    }

    /// D in µm²/µs.
    pub fn diffusion_coeff(&self) -> f64 {
        self.diffusion_coeff
    }

    /// Cleft width `a` in µm.
    pub fn width_x(&self) -> f64 {
        self.width_x
    }

    pub fn width_y(&self) -> f64 {
        self.width_y
    }

    pub fn width_z(&self) -> f64 {
        self.width_z
    }

    /// κ_a0 in µm/µs.
    pub fn intrinsic_binding_rate(&self) -> f64 {
        self.intrinsic_binding_rate
    }

    /// κ_a in µm/µs.
    pub fn effective_binding_rate(&self) -> f64 {
        self.effective_binding_rate
    }

    /// κ_d in 1/µs.
    pub fn unbinding_rate(&self) -> f64 {
        self.unbinding_rate
    }

    /// κ_e·C_E in 1/µs.
    pub fn degradation_rate(&self) -> f64 {
        self.degradation_rate
    }

    /// C*.
    pub fn receptor_count(&self) -> u64 {
        self.receptor_count
    }

    /// r in µm.
    pub fn receptor_radius(&self) -> f64 {
        self.receptor_radius
    }

    /// ρ.
    pub fn receptor_coverage(&self) -> f64 {
        self.receptor_coverage
    }

    /// `κ_a / (ρ κ_a0)`; zero when the intrinsic rate is zero.
    pub fn homogenization_ratio(&self) -> f64 {
        let denom = self.receptor_coverage * self.intrinsic_binding_rate;
        if denom > 0.0 {
            self.effective_binding_rate / denom
        } else {
            0.0
        }
    }
}

/// One instantaneous release of `count` molecules at `time` (µs).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Release {
    pub time: f64,
    pub count: u64,
}

/// Ordered release instants of the presynaptic transmitter.
#[derive(Clone, Debug, PartialEq)]
pub struct ReleaseSchedule {
    releases: Vec<Release>,
}

impl ReleaseSchedule {
    pub fn new(releases: Vec<Release>) -> Result<Self> {
        if releases.is_empty() {
            return Err(ModelError::invalid("releases", "at least one release is required"));
        }
        for (m, r) in releases.iter().enumerate() {
            if !(r.time.is_finite() && r.time >= 0.0) {
                return Err(ModelError::invalid(
                    "releases",
                    format!("release {m} has time {} (must be finite and >= 0)", r.time),
                ));
            }
            if r.count < 1 {
                return Err(ModelError::invalid(
                    "releases",
                    format!("release {m} releases no molecules"),
                ));
            }
        }
        for (m, w) in releases.windows(2).enumerate() {
            if w[1].time <= w[0].time {
                return Err(ModelError::invalid(
                    "releases",
                    format!("release times must increase strictly (releases {m} and {})", m + 1),
                ));
            }
        }
        Ok(Self { releases })
    }

    /// A single release of `count` molecules at t = 0.
    pub fn single(count: u64) -> Self {
        Self::new(vec![Release { time: 0.0, count }]).expect("count must be >= 1")
    }

    /// Equal releases of `count` molecules at each of `times`.
    pub fn uniform(count: u64, times: &[f64]) -> Result<Self> {
        Self::new(times.iter().map(|&time| Release { time, count }).collect())
    }

    pub fn releases(&self) -> &[Release] {
        &self.releases
    }

    pub fn len(&self) -> usize {
        self.releases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.releases.is_empty()
    }

    /// `N·|M|` for equal releases; the sum of counts in general.
    pub fn total_released(&self) -> u64 {
        self.releases.iter().map(|r| r.count).sum()
    }

    pub fn last_time(&self) -> f64 {
        self.releases.last().map_or(0.0, |r| r.time)
    }

    /// Molecules released at or before `t`.
    pub fn released_by(&self, t: f64) -> u64 {
        self.releases
            .iter()
            .take_while(|r| r.time <= t)
            .map(|r| r.count)
            .sum()
    }

    /// Smallest gap between consecutive releases, if there are at least two.
    pub fn min_gap(&self) -> Option<f64> {
        self.releases
            .windows(2)
            .map(|w| w[1].time - w[0].time)
            .reduce(f64::min)
    }

    /// Map each release onto a uniform time grid with spacing `interval`.
    ///
    /// Fails if a release time is not an integer multiple of the interval.
    pub fn grid_indices(&self, interval: f64, name: &'static str) -> Result<Vec<(u64, u64)>> {
        self.releases
            .iter()
            .map(|r| {
                let k = (r.time / interval).round();
                let off = (r.time - k * interval).abs();
                if off > 1e-9 * interval.max(r.time) {
                    return Err(ModelError::parameter(
                        name,
                        format!(
                            "release time {} is not a multiple of the interval {interval}",
                            r.time
                        ),
                    ));
                }
                Ok((k as u64, r.count))
            })
            .collect()
    }
}

/// Numerical settings for the state-space solver.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSettings {
    /// Number of retained eigenmodes Q.
    #[serde(default = "default_eigenmodes")]
    pub eigenmodes: usize,
    /// T in µs.
    #[serde(default = "default_sample_interval")]
    pub sample_interval: f64,
    /// Simulated time span in µs.
    pub horizon: f64,
}

fn default_eigenmodes() -> usize {
    DEFAULT_EIGENMODES
}

fn default_sample_interval() -> f64 {
    DEFAULT_SAMPLE_INTERVAL
}

impl SolverSettings {
    pub fn with_horizon(horizon: f64) -> Self {
        Self {
            eigenmodes: DEFAULT_EIGENMODES,
            sample_interval: DEFAULT_SAMPLE_INTERVAL,
            horizon,
        }
    }
}

/// Settings for particle-based runs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PbsSettings {
    /// Δt in µs.
    #[serde(default = "default_pbs_time_step")]
    pub time_step: f64,
    #[serde(default = "default_runs")]
    pub runs: usize,
    #[serde(default)]
    pub seed: u64,
    /// Times (µs) at which bound-count histograms are collected.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sample_times: Vec<f64>,
}

fn default_pbs_time_step() -> f64 {
    DEFAULT_PBS_TIME_STEP
}

fn default_runs() -> usize {
    150
}

impl Default for PbsSettings {
    fn default() -> Self {
        Self {
            time_step: DEFAULT_PBS_TIME_STEP,
            runs: default_runs(),
            seed: 0,
            sample_times: Vec::new(),
        }
    }
}

/// Serialized form of a whole configuration document.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigDocument {
    pub channel: ChannelSpec,
    pub releases: Vec<Release>,
    pub solver: SolverSettings,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pbs: Option<PbsSettings>,
}

/// Everything a configuration document resolves to.
#[derive(Clone, Debug, PartialEq)]
pub struct Config {
    pub channel: ChannelConfig,
    pub schedule: ReleaseSchedule,
    pub solver: SolverSettings,
    pub pbs: PbsSettings,
}

impl Config {
    pub fn to_document(&self) -> ConfigDocument {
        ConfigDocument {
            channel: self.channel.to_spec(),
            releases: self.schedule.releases().to_vec(),
            solver: self.solver,
            pbs: Some(self.pbs.clone()),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_document()).expect("config serializes")
    }
}

fn validate_solver(s: &SolverSettings) -> Result<()> {
    if s.eigenmodes < 1 {
        return Err(ModelError::invalid("solver.eigenmodes", "must be >= 1"));
    }
    if !(s.sample_interval.is_finite() && s.sample_interval > 0.0) {
        return Err(ModelError::invalid("solver.sample_interval", "must be > 0"));
    }
    if !(s.horizon.is_finite() && s.horizon >= 0.0) {
        return Err(ModelError::invalid("solver.horizon", "must be >= 0"));
    }
    Ok(())
}

fn validate_pbs(p: &PbsSettings) -> Result<()> {
    if !(p.time_step.is_finite() && p.time_step > 0.0) {
        return Err(ModelError::invalid("pbs.time_step", "must be > 0"));
    }
    if p.runs < 1 {
        return Err(ModelError::invalid("pbs.runs", "must be >= 1"));
    }
    if p.sample_times.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
        return Err(ModelError::invalid("pbs.sample_times", "must be finite and >= 0"));
    }
    Ok(())
}

/// Resolve an already-parsed JSON document.
pub fn load_config_value(value: serde_json::Value) -> Result<Config> {
    let obj = value
        .as_object()
        .ok_or_else(|| ModelError::Parse("top level must be an object".into()))?;
    for key in ["channel", "releases", "solver"] {
        if !obj.contains_key(key) {
            return Err(ModelError::MissingField(key));
        }
    }
    let doc: ConfigDocument =
        serde_json::from_value(value).map_err(|e| ModelError::Parse(e.to_string()))?;
    validate_solver(&doc.solver)?;
    let pbs = doc.pbs.unwrap_or_default();
    validate_pbs(&pbs)?;
    Ok(Config {
        channel: ChannelConfig::from_spec(doc.channel)?,
        schedule: ReleaseSchedule::new(doc.releases)?,
        solver: doc.solver,
        pbs,
    })
}

/// Parse and validate a JSON configuration document.
pub fn load_config(source: &str) -> Result<Config> {
    let value: serde_json::Value =
        serde_json::from_str(source).map_err(|e| ModelError::Parse(e.to_string()))?;
    load_config_value(value)
}

#[cfg(test)]
mod tests {
    use super::*;

    const REFERENCE_DOC: &str = r#"{
        "channel": {
            "diffusion_coeff": 3.3e-4,
            "channel_width_x": 0.02,
            "channel_width_y": 0.15,
            "channel_width_z": 0.15,
            "intrinsic_binding_rate": 1.02e-4,
            "unbinding_rate": 8.5e-3,
            "degradation_rate": 1e-3,
            "receptor_count": 203,
            "receptor_radius": 2.3e-3
        },
        "releases": [{"time": 0.0, "count": 1000}],
        "solver": {"horizon": 1000.0}
    }"#;

    fn doc_with(field: &str, value: serde_json::Value) -> serde_json::Value {
        let mut v: serde_json::Value = serde_json::from_str(REFERENCE_DOC).unwrap();
        v["channel"][field] = value;
        v
    }

    #[test]
    fn reference_document_loads() {
        let cfg = load_config(REFERENCE_DOC).unwrap();
        let ch = &cfg.channel;
        assert_eq!(ch.diffusion_coeff(), 3.3e-4);
        assert_eq!(ch.width_x(), 0.02);
        assert_eq!(ch.receptor_count(), 203);
        assert_eq!(ch.receptor_radius(), 2.3e-3);
        assert_eq!(ch.intrinsic_binding_rate(), 1.02e-4);
        assert_eq!(ch.unbinding_rate(), 8.5e-3);
        assert_eq!(ch.degradation_rate(), 1e-3);
        // 15% coverage
        assert!((ch.receptor_coverage() - 0.15).abs() < 1e-3);
        let expected_ka = 0.995 * ch.receptor_coverage() * 1.02e-4;
        assert_eq!(ch.effective_binding_rate(), expected_ka);
        assert_eq!(cfg.solver.eigenmodes, 100);
        assert_eq!(cfg.solver.sample_interval, 0.1);
        assert_eq!(cfg.schedule.total_released(), 1000);
        assert_eq!(cfg.channel, ChannelConfig::reference());
    }

    #[test]
    fn zero_receptors_rejected() {
        let err = load_config_value(doc_with("receptor_count", 0.into())).unwrap_err();
        assert!(err.to_string().contains("receptor_count"), "{err}");
    }

    #[test]
    fn inconsistent_coverage_rejected() {
        let derived = coverage_of(203, 2.3e-3, 0.15, 0.15);
        let ok = load_config_value(doc_with("receptor_coverage", derived.into())).unwrap();
        assert_eq!(ok.channel.receptor_coverage(), derived);

        let off = derived * (1.0 + 1e-8);
        let err = load_config_value(doc_with("receptor_coverage", off.into())).unwrap_err();
        assert!(err.to_string().contains("receptor_coverage"), "{err}");
    }

    #[test]
    fn missing_and_nonphysical_fields_are_named() {
        let mut v: serde_json::Value = serde_json::from_str(REFERENCE_DOC).unwrap();
        v["channel"].as_object_mut().unwrap().remove("diffusion_coeff");
        let err = load_config_value(v).unwrap_err();
        assert!(matches!(err, ModelError::MissingField("diffusion_coeff")));

        let err = load_config_value(doc_with("unbinding_rate", (-1.0).into())).unwrap_err();
        assert!(err.to_string().contains("unbinding_rate"), "{err}");

        let err = load_config_value(doc_with("channel_width_y", 0.0.into())).unwrap_err();
        assert!(err.to_string().contains("channel_width_y"), "{err}");

        let err = load_config_value(doc_with("no_such_field", 1.0.into())).unwrap_err();
        assert!(matches!(err, ModelError::Parse(_)));
    }

    #[test]
    fn release_schedule_invariants() {
        assert!(ReleaseSchedule::uniform(10, &[0.0, 1.0, 1.0]).is_err());
        assert!(ReleaseSchedule::uniform(10, &[-1.0]).is_err());
        assert!(ReleaseSchedule::uniform(0, &[0.0]).is_err());
        let s = ReleaseSchedule::uniform(10, &[0.0, 1000.0, 2000.0]).unwrap();
        assert_eq!(s.total_released(), 30);
        assert_eq!(s.released_by(999.0), 10);
        assert_eq!(s.released_by(1000.0), 20);
        assert_eq!(s.min_gap(), Some(1000.0));
        assert_eq!(
            s.grid_indices(0.1, "T").unwrap(),
            vec![(0, 10), (10000, 10), (20000, 10)]
        );
        assert!(ReleaseSchedule::uniform(1, &[0.05]).unwrap().grid_indices(0.1, "T").is_err());
    }

    #[test]
    fn modified_rederives_coverage_and_rate() {
        let base = ChannelConfig::reference();
        let doubled = base.modified(|s| s.receptor_count = Some(406)).unwrap();
        assert!((doubled.receptor_coverage() / base.receptor_coverage() - 2.0).abs() < 1e-12);
        assert!(
            (doubled.effective_binding_rate() / base.effective_binding_rate() - 2.0).abs() < 1e-12
        );
        assert!((doubled.homogenization_ratio() - 0.995).abs() < 1e-12);
    }

    #[test]
    fn reference_dimensional_smoke() {
        let ch = ChannelConfig::reference();
        // µm per step at Δt = 0.01 µs
        let step = (2.0 * ch.diffusion_coeff() * 0.01).sqrt();
        assert!((step - 2.569e-3).abs() < 1e-6);
        // dimensionless per-hit binding probability
        let p = ch.intrinsic_binding_rate() * (PI * 0.01 / ch.diffusion_coeff()).sqrt();
        assert!(p > 0.0 && p < 1e-2);
        // a·κ_d/κ_a is dimensionless and O(10) for the reference synapse
        let lambda = ch.width_x() * ch.unbinding_rate() / ch.effective_binding_rate();
        assert!(lambda > 10.0 && lambda < 12.0);
        // diffusive mixing time across the cleft, µs
        let mix = ch.width_x().powi(2) / ch.diffusion_coeff();
        assert!((mix - 1.2121).abs() < 1e-3);
    }

    mod roundtrip {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn load_of_serialized_config_is_identical(
                d in 1e-5f64..1e-2,
                a in 1e-3f64..1.0,
                yz in 0.05f64..0.5,
                ka0 in 0.0f64..1e-2,
                kd in 0.0f64..1.0,
                ke in 0.0f64..1.0,
                count in 1i64..400,
                radius_frac in 0.01f64..0.9,
                q in 1usize..300,
            ) {
                // keep coverage <= 0.9
                let max_r = (0.9 * yz * yz / (count as f64 * PI)).sqrt();
                let spec = ChannelSpec {
                    diffusion_coeff: Some(d),
                    channel_width_x: Some(a),
                    channel_width_y: Some(yz),
                    channel_width_z: Some(yz),
                    intrinsic_binding_rate: Some(ka0),
                    unbinding_rate: Some(kd),
                    degradation_rate: Some(ke),
                    receptor_count: Some(count),
                    receptor_radius: Some(radius_frac * max_r),
                    ..Default::default()
                };
                let cfg = Config {
                    channel: ChannelConfig::from_spec(spec).unwrap(),
                    schedule: ReleaseSchedule::uniform(100, &[0.0, 10.0]).unwrap(),
                    solver: SolverSettings { eigenmodes: q, sample_interval: 0.1, horizon: 50.0 },
                    pbs: PbsSettings::default(),
                };
                let back = load_config(&cfg.to_json()).unwrap();
                prop_assert_eq!(back, cfg);
            }
        }
    }
}
