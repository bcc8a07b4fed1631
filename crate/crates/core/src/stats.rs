//! Statistics of the number of bound receptors at a single instant.
//!
//! With N molecules released and C* receptors, the count of bound receptors
//! whose expectation is `i` is modeled as hypergeometric with population
//! `N C*/i`, `C*` successes and `N` draws. The two binomial models that treat
//! either the molecules or the receptors as independent are kept for
//! comparison.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;
use statrs::function::factorial::ln_binomial;

use crate::config::{ChannelConfig, ReleaseSchedule, SolverSettings};
use crate::error::{ModelError, Result};
use crate::ssd;

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DistributionKind {
    Hypergeometric {
        population: u64,
        successes: u64,
        draws: u64,
    },
    Binomial {
        p: f64,
        n: u64,
    },
    Empirical {
        samples: u64,
    },
}

/// A PMF on a contiguous integer support `[support_min, support_min + pmf.len())`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReceivedSignalDistribution {
    pub kind: DistributionKind,
    support_min: u64,
    pmf: Vec<f64>,
}

impl ReceivedSignalDistribution {
    /// Inclusive support bounds.
    pub fn support(&self) -> (u64, u64) {
        (
            self.support_min,
            self.support_min + self.pmf.len() as u64 - 1,
        )
    }

    pub fn pmf_at(&self, n: u64) -> f64 {
        n.checked_sub(self.support_min)
            .and_then(|k| self.pmf.get(k as usize))
            .copied()
            .unwrap_or(0.0)
    }

    /// Probabilities over the support, lowest first.
    pub fn probabilities(&self) -> &[f64] {
        &self.pmf
    }

    pub fn iter(&self) -> impl Iterator<Item = (u64, f64)> + '_ {
        self.pmf
            .iter()
            .enumerate()
            .map(move |(k, &p)| (self.support_min + k as u64, p))
    }

    pub fn mean(&self) -> f64 {
        self.iter().map(|(n, p)| n as f64 * p).sum()
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.iter().map(|(n, p)| (n as f64 - m).powi(2) * p).sum()
    }

    pub fn total_mass(&self) -> f64 {
        self.pmf.iter().sum()
    }

    /// CSV with header `n,pmf`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,pmf\n");
        for (n, p) in self.iter() {
            let _ = writeln!(out, "{n},{p}");
        }
        out
    }
}

/// Integer histogram of observed counts; `counts[n]` is the number of samples equal to n.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Histogram {
    pub counts: Vec<u64>,
}

impl Histogram {
    pub fn from_samples(samples: impl IntoIterator<Item = u64>) -> Self {
        let mut h = Self::default();
        for s in samples {
            h.add(s);
        }
        h
    }

    pub fn add(&mut self, value: u64) {
        let v = value as usize;
        if v >= self.counts.len() {
            self.counts.resize(v + 1, 0);
        }
        self.counts[v] += 1;
    }

    pub fn merge(&mut self, other: &Histogram) {
        if other.counts.len() > self.counts.len() {
            self.counts.resize(other.counts.len(), 0);
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        let t = self.total() as f64;
        self.counts
            .iter()
            .enumerate()
            .map(|(n, &c)| n as f64 * c as f64)
            .sum::<f64>()
            / t
    }

    /// Normalized empirical distribution.
    pub fn to_distribution(&self) -> Result<ReceivedSignalDistribution> {
        let total = self.total();
        if total == 0 {
            return Err(ModelError::parameter("histogram", "no samples"));
        }
        let lo = self.counts.iter().position(|&c| c > 0).unwrap_or(0);
        let hi = self.counts.iter().rposition(|&c| c > 0).unwrap_or(0);
        Ok(ReceivedSignalDistribution {
            kind: DistributionKind::Empirical { samples: total },
            support_min: lo as u64,
            pmf: self.counts[lo..=hi]
                .iter()
                .map(|&c| c as f64 / total as f64)
                .collect(),
        })
    }
}

/// Fill a PMF from its mode outward with exact ratio recurrences, then normalize.
///
/// `ratio(k)` is `P(k+1)/P(k)`.
fn pmf_from_mode(lo: u64, hi: u64, mode: u64, ln_mode: f64, ratio: impl Fn(u64) -> f64) -> Vec<f64> {
    let len = (hi - lo + 1) as usize;
    let mut pmf = vec![0.0; len];
    let at = |k: u64| (k - lo) as usize;
    pmf[at(mode)] = ln_mode.exp();
    for k in mode..hi {
        pmf[at(k + 1)] = pmf[at(k)] * ratio(k);
    }
    for k in (lo..mode).rev() {
        pmf[at(k)] = pmf[at(k + 1)] / ratio(k);
    }
    let sum: f64 = pmf.iter().sum();
    pmf.iter_mut().for_each(|p| *p /= sum);
    pmf
}

/// `P_H(n; population, successes, draws)`.
///
/// The PMF is symmetric in successes and draws; both orders give bitwise
/// identical output.
pub fn hypergeometric(population: u64, successes: u64, draws: u64) -> Result<ReceivedSignalDistribution> {
    if successes > population || draws > population {
        return Err(ModelError::parameter(
            "population",
            format!("{population} is smaller than successes {successes} or draws {draws}"),
        ));
    }
    let (k, n) = (successes.min(draws), successes.max(draws));
    let m = population;
    let lo = (n + k).saturating_sub(m);
    let hi = k;
    let mode = (((n + 1) as f64 * (k + 1) as f64) / (m + 2) as f64).floor() as u64;
    let mode = mode.clamp(lo, hi);
    let ln_mode = ln_binomial(k, mode) + ln_binomial(m - k, n - mode) - ln_binomial(m, n);
    let ratio = |j: u64| {
        ((k - j) as f64 * (n - j) as f64) / ((j + 1) as f64 * (m + j + 1 - k - n) as f64)
    };
    Ok(ReceivedSignalDistribution {
        kind: DistributionKind::Hypergeometric {
            population,
            successes,
            draws,
        },
        support_min: lo,
        pmf: pmf_from_mode(lo, hi, mode, ln_mode, ratio),
    })
}

/// `B(n; p, trials)`.
pub fn binomial(p: f64, trials: u64) -> Result<ReceivedSignalDistribution> {
    if !(0.0..=1.0).contains(&p) {
        return Err(ModelError::parameter("p", format!("{p} is not a probability")));
    }
    let kind = DistributionKind::Binomial { p, n: trials };
    if p == 0.0 || p == 1.0 || trials == 0 {
        let at = if p == 1.0 { trials } else { 0 };
        return Ok(ReceivedSignalDistribution {
            kind,
            support_min: at,
            pmf: vec![1.0],
        });
    }
    let mode = (((trials + 1) as f64) * p).floor().min(trials as f64) as u64;
    let ln_mode = ln_binomial(trials, mode)
        + mode as f64 * p.ln()
        + (trials - mode) as f64 * (-p).ln_1p();
    let odds = p / (1.0 - p);
    let ratio = |k: u64| (trials - k) as f64 / (k + 1) as f64 * odds;
    Ok(ReceivedSignalDistribution {
        kind,
        support_min: 0,
        pmf: pmf_from_mode(0, trials, mode, ln_mode, ratio),
    })
}

fn check_mean(n: u64, capacity: u64, i: f64) -> Result<()> {
    if n < 1 || capacity < 1 {
        return Err(ModelError::parameter("N, C*", "both must be >= 1"));
    }
    if !(i > 0.0) {
        return Err(ModelError::Domain(format!("expected bound count {i} must be > 0")));
    }
    let cap = n.min(capacity) as f64;
    if i > cap {
        return Err(ModelError::Domain(format!(
            "expected bound count {i} exceeds min(N, C*) = {cap}"
        )));
    }
    Ok(())
}

/// Whether `i ≤ C*/(1 + C*/N)`, the side condition of the hypergeometric approximation.
pub fn technical_condition_holds(n: u64, capacity: u64, i: f64) -> bool {
    let c = capacity as f64;
    i <= c / (1.0 + c / n as f64)
}

/// `round(N C*/i)`, clamped so the support stays valid.
pub fn population_for(n: u64, capacity: u64, i: f64) -> u64 {
    let raw = (n as f64 * capacity as f64 / i).round();
    let floor = n.max(capacity) as f64;
    raw.max(floor) as u64
}

/// Hypergeometric model for N molecules, C* receptors and expected bound count `i`.
pub fn hypergeom_from_mean(n: u64, capacity: u64, i: f64) -> Result<ReceivedSignalDistribution> {
    check_mean(n, capacity, i)?;
    if !technical_condition_holds(n, capacity, i) {
        log::warn!(
            "i = {i} exceeds C*/(1 + C*/N) for N = {n}, C* = {capacity}; \
             the hypergeometric approximation may be less accurate"
        );
    }
    hypergeometric(population_for(n, capacity, i), capacity, n)
}

/// Mean and variance of the hypergeometric model from the closed form.
pub fn hypergeom_mean_var(n: u64, capacity: u64, i: f64) -> Result<(f64, f64)> {
    check_mean(n, capacity, i)?;
    Ok((i, hypergeom_variance(n, capacity, i)))
}

fn hypergeom_variance(n: u64, capacity: u64, i: f64) -> f64 {
    let (nf, c) = (n as f64, capacity as f64);
    let v = i * (1.0 - i / nf) * (1.0 - i / c) / (1.0 - i / (nf * c));
    v.max(0.0)
}

/// `(B(i/N, N), B(i/C*, C*))`.
pub fn binomial_comparators(
    n: u64,
    capacity: u64,
    i: f64,
) -> Result<(ReceivedSignalDistribution, ReceivedSignalDistribution)> {
    if !(i >= 0.0) || i > n.min(capacity) as f64 {
        return Err(ModelError::Domain(format!(
            "expected bound count {i} outside [0, min(N, C*)]"
        )));
    }
    Ok((
        binomial(i / n as f64, n)?,
        binomial(i / capacity as f64, capacity)?,
    ))
}

/// Probability that molecule `p` binds given that `m` of the first `p − 1` did.
pub fn conditional_binding_chain(n: u64, capacity: u64, i: f64, m: u64, p: u64) -> Result<f64> {
    check_mean(n, capacity, i)?;
    if p < 1 || p > n {
        return Err(ModelError::parameter("p", format!("{p} outside [1, {n}]")));
    }
    if m > (p - 1).min(capacity) {
        return Err(ModelError::parameter(
            "m",
            format!("{m} exceeds min(p - 1, C*) = {}", (p - 1).min(capacity)),
        ));
    }
    let (nf, c, pf) = (n as f64, capacity as f64, p as f64);
    let free = (c - m as f64) / c;
    let remaining = nf - pf + 1.0;
    Ok(free * remaining / (nf - (pf - 1.0) * (i / c)) * i / remaining)
}

/// Total-variation distance `½ Σ |p(n) − q(n)|`.
pub fn total_variation(a: &ReceivedSignalDistribution, b: &ReceivedSignalDistribution) -> f64 {
    let lo = a.support().0.min(b.support().0);
    let hi = a.support().1.max(b.support().1);
    0.5 * (lo..=hi).map(|n| (a.pmf_at(n) - b.pmf_at(n)).abs()).sum::<f64>()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ChiSquare {
    pub statistic: f64,
    pub degrees_of_freedom: u64,
}

/// Pearson chi-square of observed counts against a model PMF.
///
/// Adjacent bins are pooled from the low end until each pooled bin expects at
/// least `min_expected` samples; an underfilled tail joins the last bin.
pub fn chi_square(observed: &Histogram, model: &ReceivedSignalDistribution, min_expected: f64) -> Result<ChiSquare> {
    let total = observed.total() as f64;
    if total == 0.0 {
        return Err(ModelError::parameter("histogram", "no samples"));
    }
    let hi = model.support().1.max(observed.counts.len() as u64);
    let mut bins: Vec<(f64, f64)> = Vec::new();
    let (mut o, mut e) = (0.0, 0.0);
    for n in 0..=hi {
        o += observed.counts.get(n as usize).copied().unwrap_or(0) as f64;
        e += model.pmf_at(n) * total;
        if e >= min_expected {
            bins.push((o, e));
            o = 0.0;
            e = 0.0;
        }
    }
    match bins.last_mut() {
        Some(last) => {
            last.0 += o;
            last.1 += e;
        }
        None => bins.push((o, e)),
    }
    let statistic = bins
        .iter()
        .map(|&(o, e)| if e > 0.0 { (o - e).powi(2) / e } else { 0.0 })
        .sum();
    Ok(ChiSquare {
        statistic,
        degrees_of_freedom: bins.len().saturating_sub(1) as u64,
    })
}

/// Parameter varied in a variance sweep.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    ReceptorCount,
    ReleaseCount,
    IntrinsicBindingRate,
}

impl SweepParameter {
    pub fn name(self) -> &'static str {
        match self {
            Self::ReceptorCount => "receptor_count",
            Self::ReleaseCount => "release_count",
            Self::IntrinsicBindingRate => "intrinsic_binding_rate",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub param: f64,
    pub t_peak: f64,
    pub i_peak: f64,
    pub variance: f64,
}

/// Peak mean and hypergeometric variance at the peak for each swept value.
///
/// Every point is a single release of `releases` molecules at t = 0.
/// Derived quantities (coverage, effective binding rate) follow the swept value.
pub fn variance_sweep(
    base: &ChannelConfig,
    releases: u64,
    settings: &SolverSettings,
    parameter: SweepParameter,
    values: &[f64],
) -> Result<Vec<SweepRow>> {
    values
        .par_iter()
        .map(|&v| {
            let (cfg, n) = match parameter {
                SweepParameter::ReceptorCount => (
                    base.modified(|s| {
                        s.receptor_count = Some(v.round() as i64);
                        s.receptor_coverage = None;
                    })?,
                    releases,
                ),
                SweepParameter::ReleaseCount => (base.clone(), v.round() as u64),
                SweepParameter::IntrinsicBindingRate => {
                    (base.modified(|s| s.intrinsic_binding_rate = Some(v))?, releases)
                }
            };
            if n == 0 {
                return Err(ModelError::parameter("releases", "must be >= 1"));
            }
            let trace = ssd::run(&cfg, &ReleaseSchedule::single(n), settings)?;
            let (k, i_peak) = trace.peak();
            let variance = if i_peak > 0.0 {
                hypergeom_variance(n, cfg.receptor_count(), i_peak)
            } else {
                0.0
            };
            Ok(SweepRow {
                param: v,
                t_peak: trace.time(k),
                i_peak,
                variance,
            })
        })
        .collect()
}

/// CSV with header `param,i_peak,var`.
pub fn sweep_to_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("param,i_peak,var\n");
    for r in rows {
        let _ = writeln!(out, "{},{},{}", r.param, r.i_peak, r.variance);
    }
    out
}
