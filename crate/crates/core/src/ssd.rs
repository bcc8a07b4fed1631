//! Discrete-time state-space solver for the expected received signal.
//!
//! The concentration in the cleft is expanded in the cosine eigenbasis and
//! the coefficients are advanced with an impulse-invariant recursion. The
//! nonlinear receptor boundary is closed as a feedback loop with a one-sample
//! delay:
//!
//! ```text
//! κ̂_a[k] = κ_a (1 − i[k]/C*)        κ̂_d[k] = κ_d i[k]
//! φ[k+1]  = κ̂_a[k] c[a,k] − κ̂_d[k]
//! ȳ[k+1]  = e^{−κ_e C_E T} e^{AT} ȳ[k] − T φ[k+1] c̃₂(a) + T f̄[k+1]
//! i[k+1]  = i[k] + T φ[k+1]
//! ```
//!
//! `e^{AT}` is diagonal and `c̃₂(a) c₁ᵀ(a)` is rank one, so a step costs O(Q).
//! A release of N molecules at x = 0 adds N to every coefficient. The boundary
//! observation c[a,k] is read before the impulses of sample k are added.

use crate::basis::EigenBasis;
use crate::config::{ChannelConfig, ReleaseSchedule, SolverSettings};
use crate::error::{ModelError, Result};
use crate::trace::SignalTrace;

/// Absolute slack on `0 ≤ i ≤ C*`, relative to C*.
pub const BOUND_TOLERANCE: f64 = 1e-6;

/// Receptor boundary law closing the feedback loop.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoundaryLaw {
    /// Binding rate scaled by the free-receptor fraction `1 − i/C*`.
    Saturating,
    /// Reference model that ignores receptor occupancy.
    Linear,
}

/// Solver state at sample k.
#[derive(Clone, Debug, PartialEq)]
pub struct SsdState {
    /// Expansion coefficients ȳ[k]; `coeffs[0]` is the number of solute molecules.
    pub coeffs: Vec<f64>,
    /// Accumulated net boundary flux i[k], the expected bound-receptor count.
    pub bound: f64,
    pub step_index: u64,
    /// T in µs.
    pub sample_interval: f64,
    /// Molecules injected at x = 0 at this sample.
    pub fresh_release: f64,
    /// Boundary uptake T·φ removed at x = a at this sample.
    pub fresh_uptake: f64,
}

impl SsdState {
    pub fn zero(truncation: usize, sample_interval: f64) -> Self {
        Self {
            coeffs: vec![0.0; truncation],
            bound: 0.0,
            step_index: 0,
            sample_interval,
            fresh_release: 0.0,
            fresh_uptake: 0.0,
        }
    }

    /// Add an instantaneous release of `count` molecules at x = 0.
    pub fn inject(&mut self, count: f64) {
        if count != 0.0 {
            self.coeffs.iter_mut().for_each(|c| *c += count);
            self.fresh_release += count;
        }
    }

    /// Solute molecules in the cleft.
    pub fn solute(&self) -> f64 {
        self.coeffs[0]
    }

    pub fn time(&self) -> f64 {
        self.step_index as f64 * self.sample_interval
    }
}

/// Precomputed operators for one channel, truncation and sample interval.
#[derive(Clone, Debug)]
pub struct SsdSolver {
    basis: EigenBasis,
    law: BoundaryLaw,
    interval: f64,
    propagator: Vec<f64>,
    boundary_row: Vec<f64>,
    boundary_row_sum: f64,
    boundary_self: f64,
    boundary_col: Vec<f64>,
    kappa_a: f64,
    kappa_d: f64,
    capacity: f64,
    degradation_loss: f64,
}

impl SsdSolver {
    pub fn new(
        cfg: &ChannelConfig,
        truncation: usize,
        sample_interval: f64,
        law: BoundaryLaw,
    ) -> Result<Self> {
        if !(sample_interval.is_finite() && sample_interval > 0.0) {
            return Err(ModelError::parameter("T", "sample interval must be > 0"));
        }
        let basis = EigenBasis::new(cfg, truncation)?;
        let ke = cfg.degradation_rate();
        let propagator = basis
            .eigenvalues()
            .iter()
            .map(|s| ((s - ke) * sample_interval).exp())
            .collect();
        let boundary_row = basis.output_row_at_boundary();
        let boundary_row_sum = boundary_row.iter().sum();
        let boundary_col = basis.boundary_col();
        let boundary_self = basis.scaling().iter().map(|n| 1.0 / n).sum();
        Ok(Self {
            basis,
            law,
            interval: sample_interval,
            propagator,
            boundary_row,
            boundary_row_sum,
            boundary_self,
            boundary_col,
            kappa_a: cfg.effective_binding_rate(),
            kappa_d: cfg.unbinding_rate(),
            capacity: cfg.receptor_count() as f64,
            degradation_loss: -(-ke * sample_interval).exp_m1(),
        })
    }

    pub fn basis(&self) -> &EigenBasis {
        &self.basis
    }

    pub fn law(&self) -> BoundaryLaw {
        self.law
    }

    pub fn sample_interval(&self) -> f64 {
        self.interval
    }

    pub fn initial_state(&self) -> SsdState {
        SsdState::zero(self.basis.truncation(), self.interval)
    }

    /// c[a,k] = c₁ᵀ(a) ȳ[k], taken just before the impulses of sample k.
    ///
    /// A release at x = 0 and the uptake at x = a enter ȳ[k] as point
    /// impulses. Their truncated synthesis at x = a is pure Gibbs ringing
    /// (`−N/a` and `T φ (2Q − 1)/a`), so both are left out.
    pub fn boundary_conc(&self, state: &SsdState) -> f64 {
        let full: f64 = self
            .boundary_row
            .iter()
            .zip(&state.coeffs)
            .map(|(r, y)| r * y)
            .sum();
        full - state.fresh_release * self.boundary_row_sum + state.fresh_uptake * self.boundary_self
    }

    /// Discrete-time reaction rates (κ̂_a[k], κ̂_d[k]) for bound count `i`.
    pub fn rates(&self, bound: f64) -> (f64, f64) {
        let ka = match self.law {
            BoundaryLaw::Saturating => self.kappa_a * (1.0 - bound / self.capacity),
            BoundaryLaw::Linear => self.kappa_a,
        };
        (ka, self.kappa_d * bound)
    }

    /// Molecules degraded while advancing from `state` to the next sample.
    pub fn degradation_loss(&self, state: &SsdState) -> f64 {
        // only the µ = 0 mode integrates to a nonzero amount
        self.degradation_loss * state.coeffs[0]
    }

    /// Advance in place by one sample and inject `release` molecules at the new sample.
    pub fn advance(&self, state: &mut SsdState, release: f64) -> Result<()> {
        let c_a = self.boundary_conc(state);
        let (ka, kd) = self.rates(state.bound);
        let flux = ka * c_a - kd;
        let kick = self.interval * flux;
        for ((y, p), col) in state
            .coeffs
            .iter_mut()
            .zip(&self.propagator)
            .zip(&self.boundary_col)
        {
            *y = p * *y - kick * col + release;
        }
        state.bound += kick;
        state.step_index += 1;
        state.fresh_release = release;
        state.fresh_uptake = kick;
        self.check_bound(state)
    }

    /// Functional form of [`SsdSolver::advance`].
    pub fn step(&self, state: &SsdState, release: f64) -> Result<SsdState> {
        let mut next = state.clone();
        self.advance(&mut next, release)?;
        Ok(next)
    }

    fn check_bound(&self, state: &SsdState) -> Result<()> {
        let tol = BOUND_TOLERANCE * self.capacity;
        let upper = match self.law {
            BoundaryLaw::Saturating => self.capacity + tol,
            BoundaryLaw::Linear => f64::INFINITY,
        };
        if state.bound < -tol || state.bound > upper || !state.bound.is_finite() {
            return Err(ModelError::Stability {
                step: state.step_index,
                bound: state.bound,
                capacity: self.capacity,
            });
        }
        Ok(())
    }

    /// Truncated synthesis of c(x) at the given positions.
    ///
    /// The truncated series of a point release oscillates (Gibbs ringing), so
    /// this is only meaningful once the profile has smoothed out.
    pub fn truncated_concentration_profile(&self, state: &SsdState, xs: &[f64]) -> Vec<f64> {
        xs.iter()
            .map(|&x| {
                self.basis
                    .output_row_at(x)
                    .iter()
                    .zip(&state.coeffs)
                    .map(|(r, y)| r * y)
                    .sum()
            })
            .collect()
    }
}

/// Truncated eigenbasis for `cfg` with `truncation` modes.
pub fn build_basis(cfg: &ChannelConfig, truncation: usize) -> Result<EigenBasis> {
    EigenBasis::new(cfg, truncation)
}

/// Expected signal with the saturating receptor boundary.
pub fn run(
    cfg: &ChannelConfig,
    schedule: &ReleaseSchedule,
    settings: &SolverSettings,
) -> Result<SignalTrace> {
    run_with_law(cfg, schedule, settings, BoundaryLaw::Saturating)
}

/// Expected signal with the non-saturating reference boundary.
pub fn run_linear_reference(
    cfg: &ChannelConfig,
    schedule: &ReleaseSchedule,
    settings: &SolverSettings,
) -> Result<SignalTrace> {
    run_with_law(cfg, schedule, settings, BoundaryLaw::Linear)
}

pub fn run_with_law(
    cfg: &ChannelConfig,
    schedule: &ReleaseSchedule,
    settings: &SolverSettings,
    law: BoundaryLaw,
) -> Result<SignalTrace> {
    let interval = settings.sample_interval;
    let solver = SsdSolver::new(cfg, settings.eigenmodes, interval, law)?;
    if settings.horizon + 1e-9 < schedule.last_time() {
        return Err(ModelError::parameter(
            "horizon",
            format!(
                "{} ends before the last release at {}",
                settings.horizon,
                schedule.last_time()
            ),
        ));
    }
    let releases = schedule.grid_indices(interval, "T")?;
    let n_steps = (settings.horizon / interval + 1e-9).floor() as u64;
    let len = n_steps as usize + 1;

    let mut trace = SignalTrace {
        sample_interval: interval,
        bound: Vec::with_capacity(len),
        boundary_conc: Vec::with_capacity(len),
        total_molecules: Vec::with_capacity(len),
        solute: Vec::with_capacity(len),
    };

    let mut pending = releases.iter().peekable();
    let mut released_at = |k: u64| -> f64 {
        let mut n = 0u64;
        while let Some(&&(idx, count)) = pending.peek() {
            if idx != k {
                break;
            }
            n += count;
            pending.next();
        }
        n as f64
    };

    let mut state = solver.initial_state();
    let first = released_at(0);
    state.inject(first);
    let mut total = first;

    for k in 0..=n_steps {
        trace.bound.push(state.bound);
        trace.boundary_conc.push(solver.boundary_conc(&state));
        trace.total_molecules.push(total);
        trace.solute.push(state.solute());
        if k == n_steps {
            break;
        }
        let loss = solver.degradation_loss(&state);
        let release = released_at(k + 1);
        solver.advance(&mut state, release)?;
        total += release - loss;
    }
    Ok(trace)
}

/// Expected solute plus bound molecules N(kT) from a coefficient history.
///
/// `history[k']` holds ȳ[k'] for `k' < k`. The result is the number of
/// molecules released by `kT` minus the cumulative degradation loss
/// `Σ_{k'<k} (1 − e^{−κ_e C_E T}) ∫c₁ᵀ(x)dx e^{AT} ȳ[k']`.
pub fn total_molecules<C: AsRef<[f64]>>(
    history: &[C],
    schedule: &ReleaseSchedule,
    cfg: &ChannelConfig,
    basis: &EigenBasis,
    sample_interval: f64,
    k: usize,
) -> Result<f64> {
    if k > history.len() {
        return Err(ModelError::parameter(
            "k",
            format!("history holds {} samples, need {k}", history.len()),
        ));
    }
    let released: u64 = schedule
        .grid_indices(sample_interval, "T")?
        .into_iter()
        .filter(|&(idx, _)| idx <= k as u64)
        .map(|(_, n)| n)
        .sum();
    let weights: Vec<f64> = basis
        .integrated_output_row()
        .iter()
        .zip(basis.eigenvalues())
        .map(|(w, s)| w * (s * sample_interval).exp())
        .collect();
    let loss_fraction = -(-cfg.degradation_rate() * sample_interval).exp_m1();
    let lost: f64 = history[..k]
        .iter()
        .map(|coeffs| {
            weights
                .iter()
                .zip(coeffs.as_ref())
                .map(|(w, y)| w * y)
                .sum::<f64>()
        })
        .sum::<f64>()
        * loss_fraction;
    Ok(released as f64 - lost)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ChannelSpec;
    use approx::assert_relative_eq;

    fn inert_channel() -> ChannelConfig {
        ChannelConfig::reference()
            .modified(|s| {
                s.effective_binding_rate = Some(0.0);
                s.unbinding_rate = Some(0.0);
                s.degradation_rate = Some(0.0);
            })
            .unwrap()
    }

    #[test]
    fn without_reactions_coefficients_decay_by_eigenvalue() {
        let cfg = inert_channel();
        let solver = SsdSolver::new(&cfg, 8, 0.1, BoundaryLaw::Saturating).unwrap();
        let mut state = solver.initial_state();
        state.coeffs = (0..8).map(|m| 1.0 + m as f64).collect();
        state.bound = 3.0;
        let next = solver.step(&state, 0.0).unwrap();
        for (m, (&y1, &y0)) in next.coeffs.iter().zip(&state.coeffs).enumerate() {
            let s = solver.basis().eigenvalues()[m];
            assert_relative_eq!(y1, y0 * (s * 0.1).exp(), max_relative = 1e-14);
        }
        assert_eq!(next.bound, 3.0);
    }

    #[test]
    fn release_sets_every_coefficient() {
        let cfg = ChannelConfig::reference();
        let solver = SsdSolver::new(&cfg, 100, 0.1, BoundaryLaw::Saturating).unwrap();
        let next = solver.step(&solver.initial_state(), 1000.0).unwrap();
        assert!(next.coeffs.iter().all(|&y| y == 1000.0));
        assert_eq!(next.solute(), 1000.0);
        assert_eq!(next.bound, 0.0);
        // the truncated point release rings, but the boundary observation
        // ignores molecules still sitting at x = 0
        assert_eq!(solver.boundary_conc(&next), 0.0);
        let xs = [0.0, 0.5e-3];
        let prof = solver.truncated_concentration_profile(&next, &xs);
        // Σ_µ cos(0)/N_µ = (1 + 2(Q-1))/a
        assert_relative_eq!(prof[0], 1000.0 * 199.0 / 0.02, max_relative = 1e-12);
    }

    #[test]
    fn boundary_reads_zero_flux_profile_after_one_step() {
        // one step after a release the observation is the Neumann heat kernel
        // at x = a, which is positive
        let cfg = inert_channel();
        let solver = SsdSolver::new(&cfg, 100, 0.1, BoundaryLaw::Saturating).unwrap();
        let mut s = solver.initial_state();
        s.inject(1000.0);
        solver.advance(&mut s, 0.0).unwrap();
        let c = solver.boundary_conc(&s);
        // method of images: a source on the reflecting wall counts twice,
        // 2 Σ_n G(a + 2na) with G the free Gaussian kernel
        let dt = 0.1 * cfg.diffusion_coeff();
        let oracle: f64 = (-20i32..=20)
            .map(|n| {
                let x = 0.02 * (2 * n + 1) as f64;
                (-(x * x) / (4.0 * dt)).exp() / (4.0 * std::f64::consts::PI * dt).sqrt()
            })
            .sum::<f64>()
            * 2000.0;
        assert!(c > 0.0);
        assert_relative_eq!(c, oracle, max_relative = 1e-9);
    }

    #[test]
    fn linear_law_ignores_capacity() {
        let cfg = ChannelConfig::reference();
        let sat = SsdSolver::new(&cfg, 4, 0.1, BoundaryLaw::Saturating).unwrap();
        let lin = SsdSolver::new(&cfg, 4, 0.1, BoundaryLaw::Linear).unwrap();
        let ka = cfg.effective_binding_rate();
        assert_eq!(lin.rates(100.0).0, ka);
        assert_relative_eq!(sat.rates(100.0).0, ka * (1.0 - 100.0 / 203.0));
        assert_eq!(sat.rates(100.0).1, 100.0 * 8.5e-3);
    }

    #[test]
    fn oversized_step_reports_stability_error() {
        let cfg = ChannelConfig::reference()
            .modified(|s| s.effective_binding_rate = Some(10.0))
            .unwrap();
        let schedule = ReleaseSchedule::single(100_000);
        let settings = SolverSettings {
            eigenmodes: 100,
            sample_interval: 1.0,
            horizon: 50.0,
        };
        let err = run(&cfg, &schedule, &settings).unwrap_err();
        assert!(err.is_numerical(), "{err}");
    }

    #[test]
    fn off_grid_release_rejected() {
        let schedule = ReleaseSchedule::uniform(10, &[0.0, 1.05]).unwrap();
        let settings = SolverSettings {
            eigenmodes: 10,
            sample_interval: 0.1,
            horizon: 2.0,
        };
        assert!(run(&ChannelConfig::reference(), &schedule, &settings).is_err());
    }

    #[test]
    fn horizon_before_last_release_rejected() {
        let schedule = ReleaseSchedule::uniform(10, &[0.0, 10.0]).unwrap();
        let settings = SolverSettings::with_horizon(5.0);
        assert!(run(&ChannelConfig::reference(), &schedule, &settings).is_err());
    }

    #[test]
    fn no_degradation_keeps_every_molecule() {
        let cfg = ChannelConfig::reference()
            .modified(|s| s.degradation_rate = Some(0.0))
            .unwrap();
        let schedule = ReleaseSchedule::uniform(500, &[0.0, 20.0]).unwrap();
        let trace = run(&cfg, &schedule, &SolverSettings::with_horizon(50.0)).unwrap();
        for (k, &n) in trace.total_molecules.iter().enumerate() {
            let t = trace.time(k);
            assert_eq!(n, schedule.released_by(t + 1e-9) as f64);
            let sum = trace.solute[k] + trace.bound[k];
            assert_relative_eq!(sum, n, max_relative = 1e-12);
        }
    }

    #[test]
    fn ledger_matches_history_route() {
        let cfg = ChannelConfig::reference();
        let solver = SsdSolver::new(&cfg, 40, 0.1, BoundaryLaw::Saturating).unwrap();
        let schedule = ReleaseSchedule::uniform(1000, &[0.0, 5.0]).unwrap();
        let settings = SolverSettings {
            eigenmodes: 40,
            sample_interval: 0.1,
            horizon: 30.0,
        };
        let trace = run(&cfg, &schedule, &settings).unwrap();

        let mut history = Vec::new();
        let mut state = solver.initial_state();
        state.inject(1000.0);
        for k in 0..300u64 {
            history.push(state.coeffs.clone());
            let rel = if k + 1 == 50 { 1000.0 } else { 0.0 };
            solver.advance(&mut state, rel).unwrap();
        }
        assert_eq!(
            total_molecules(&history, &schedule, &cfg, solver.basis(), 0.1, 0).unwrap(),
            1000.0
        );
        for k in [1usize, 49, 50, 51, 299] {
            let n = total_molecules(&history, &schedule, &cfg, solver.basis(), 0.1, k).unwrap();
            assert_relative_eq!(n, trace.total_molecules[k], max_relative = 1e-12);
        }
        assert!(total_molecules(&history, &schedule, &cfg, solver.basis(), 0.1, 301).is_err());
    }

    #[test]
    fn total_before_first_release_is_zero() {
        let cfg = ChannelConfig::from_spec(ChannelSpec::reference()).unwrap();
        let basis = build_basis(&cfg, 5).unwrap();
        let schedule = ReleaseSchedule::uniform(10, &[1.0]).unwrap();
        let history = vec![vec![0.0; 5]; 5];
        let n = total_molecules(&history, &schedule, &cfg, &basis, 0.1, 5).unwrap();
        assert_eq!(n, 0.0);
    }
}
