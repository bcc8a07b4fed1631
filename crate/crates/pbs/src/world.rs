//! One realization of the particle simulation.
//!
//! Solute molecules move by Gaussian steps with per-axis standard deviation
//! `√(2DΔt)` inside the box `[0, a] × [0, L_y] × [0, L_z]` with specular
//! walls. A step whose x-coordinate ends beyond `a` crosses the receptor face;
//! with probability `p = κ_a0 √(πΔt/D)` the crossing point is tested against
//! the receptor disks and the molecule binds if it lands on a free one.
//! Otherwise it is reflected. Bound molecules unbind with probability
//! `1 − e^{−κ_d Δt}` per step and reappear at the receptor center, one mean
//! step inside the cleft. Solute molecules degrade with probability
//! `1 − e^{−κ_e C_E Δt}` per step. Within a step the order is
//! move, bind or reflect, unbind, degrade.
//!
//! Two exact shortcuts keep the per-step cost at one Gaussian draw per
//! molecule:
//!
//! * The y and z coordinates do not influence anything until a binding test,
//!   and a reflected Gaussian walk observed after `n` steps is distributed as
//!   the folded value of `y₀ + √n σ Z`. They are therefore only drawn when a
//!   test happens.
//! * Bernoulli trials are replaced by geometric skips: each molecule counts
//!   down the crossings until its next binding test, and one counter over the
//!   sequence of per-step solute trials marks the next degradation.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use rand::{Rng, SeedableRng};
use rand::RngCore;
use rand_xoshiro::{SplitMix64, Xoshiro256PlusPlus};
use rand_distr::StandardNormal;

use dmc_core::config::{ChannelConfig, ReleaseSchedule};

use crate::error::{PbsError, Result};
use crate::receptors::ReceptorLayout;

/// Countdown value that never reaches zero within a run.
const NEVER: u64 = u64::MAX;

/// Per-crossing binding-test probability `κ_a0 √(πΔt/D)`.
pub fn binding_probability(cfg: &ChannelConfig, time_step: f64) -> f64 {
    cfg.intrinsic_binding_rate() * (std::f64::consts::PI * time_step / cfg.diffusion_coeff()).sqrt()
}

/// Reflect `u` into `[0, width]`.
#[inline]
pub fn fold(u: f64, width: f64) -> f64 {
    if u > width {
        let m = 2.0 * width - u;
        if m >= 0.0 {
            return m;
        }
    } else if u < 0.0 {
        if -u <= width {
            return -u;
        }
    } else {
        return u;
    }
    let m = u.rem_euclid(2.0 * width);
    if m > width {
        2.0 * width - m
    } else {
        m
    }
}

/// Generator used by every realization.
pub type RunRng = Xoshiro256PlusPlus;

/// Generator for run `run_index` of an ensemble seeded with `seed`.
///
/// The run's state is expanded by SplitMix64 from a key that mixes both
/// numbers, so nearby seeds and run indices give unrelated streams.
pub fn run_rng(seed: u64, run_index: u64) -> RunRng {
    let base = SplitMix64::seed_from_u64(seed).next_u64();
    let key = SplitMix64::seed_from_u64(base ^ run_index).next_u64();
    Xoshiro256PlusPlus::seed_from_u64(key)
}

/// Bound, solute and degraded molecule counts at one instant.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Counts {
    pub bound: u32,
    pub solute: u32,
    pub degraded: u32,
}

/// Fixed per-step constants.
#[derive(Clone, Debug)]
struct Kinetics {
    sigma: f64,
    width_x: f64,
    width_y: f64,
    width_z: f64,
    /// ln(1 − p) for binding tests, unbinding and degradation.
    ln_keep_bind: f64,
    ln_keep_bound: f64,
    ln_keep_solute: f64,
}

/// Structure-of-arrays store of solute molecules.
#[derive(Clone, Debug, Default)]
struct Solute {
    x: Vec<f64>,
    y: Vec<f64>,
    z: Vec<f64>,
    /// Step at which y and z were last drawn.
    yz_step: Vec<u64>,
    /// Crossings left until the next binding test.
    to_test: Vec<u32>,
}

impl Solute {
    fn len(&self) -> usize {
        self.x.len()
    }

    fn push(&mut self, x: f64, y: f64, z: f64, step: u64, to_test: u32) {
        self.x.push(x);
        self.y.push(y);
        self.z.push(z);
        self.yz_step.push(step);
        self.to_test.push(to_test);
    }

    fn swap_remove(&mut self, j: usize) {
        self.x.swap_remove(j);
        self.y.swap_remove(j);
        self.z.swap_remove(j);
        self.yz_step.swap_remove(j);
        self.to_test.swap_remove(j);
    }
}

/// Number of Bernoulli trials up to and including the first success, for a
/// success probability with `ln(1 − p) = ln_keep`.
#[inline]
fn geometric<R: Rng>(rng: &mut R, ln_keep: f64) -> u64 {
    if ln_keep == 0.0 {
        return NEVER;
    }
    let u: f64 = rng.gen();
    let g = ((1.0 - u).ln() / ln_keep).ceil();
    if g < 1.0 {
        1
    } else if g >= 1e18 {
        NEVER - 1
    } else {
        g as u64
    }
}

/// Crossing countdown for one molecule; values beyond `u32` never fire in practice.
#[inline]
fn crossings_until_test<R: Rng>(rng: &mut R, ln_keep: f64) -> u32 {
    geometric(rng, ln_keep).min(u32::MAX as u64) as u32
}

/// State of one realization.
#[derive(Clone, Debug)]
pub struct World {
    kin: Kinetics,
    receptors: ReceptorLayout,
    occupied: Vec<bool>,
    rng: RunRng,
    time_step: f64,
    step: u64,
    solute: Solute,
    /// (unbinding step, receptor) for every bound molecule.
    bound: BinaryHeap<Reverse<(u64, u32)>>,
    degraded: u32,
    /// Solute trials left until the next degradation.
    degrade_gap: u64,
    released: u64,
    releases: Vec<(u64, u64)>,
    next_release: usize,
    /// Scratch list of (index, x before, x after) for molecules crossing x = a.
    crossers: Vec<(u32, f64, f64)>,
}

impl World {
    /// New realization; draws the receptor layout and injects releases due at step 0.
    pub fn new(
        cfg: &ChannelConfig,
        schedule: &ReleaseSchedule,
        time_step: f64,
        seed: u64,
        run_index: u64,
    ) -> Result<Self> {
        if !(time_step.is_finite() && time_step > 0.0) {
            return Err(PbsError::parameter("time_step", "must be > 0"));
        }
        let p = binding_probability(cfg, time_step);
        if p > 1.0 {
            return Err(PbsError::parameter(
                "time_step",
                format!("binding probability per crossing is {p} > 1"),
            ));
        }
        let releases = schedule.grid_indices(time_step, "time_step")?;
        let mut rng = run_rng(seed, run_index);
        let receptors = ReceptorLayout::place(
            cfg.receptor_count(),
            cfg.receptor_radius(),
            cfg.width_y(),
            cfg.width_z(),
            &mut rng,
        )?;
        let keep = |rate: f64| -rate * time_step;
        let kin = Kinetics {
            sigma: (2.0 * cfg.diffusion_coeff() * time_step).sqrt(),
            width_x: cfg.width_x(),
            width_y: cfg.width_y(),
            width_z: cfg.width_z(),
            ln_keep_bind: (-p).ln_1p(),
            ln_keep_bound: keep(cfg.unbinding_rate()),
            ln_keep_solute: keep(cfg.degradation_rate()),
        };
        let degrade_gap = geometric(&mut rng, kin.ln_keep_solute);
        let mut world = Self {
            kin,
            occupied: vec![false; receptors.len()],
            receptors,
            rng,
            time_step,
            step: 0,
            solute: Solute::default(),
            bound: BinaryHeap::new(),
            degraded: 0,
            degrade_gap,
            released: 0,
            releases,
            next_release: 0,
            crossers: Vec::new(),
        };
        world.inject_due();
        Ok(world)
    }

    pub fn step_index(&self) -> u64 {
        self.step
    }

    pub fn time(&self) -> f64 {
        self.step as f64 * self.time_step
    }

    pub fn receptors(&self) -> &ReceptorLayout {
        &self.receptors
    }

    pub fn counts(&self) -> Counts {
        Counts {
            bound: self.bound.len() as u32,
            solute: self.solute.len() as u32,
            degraded: self.degraded,
        }
    }

    pub fn released(&self) -> u64 {
        self.released
    }

    pub fn occupied_receptors(&self) -> usize {
        self.occupied.iter().filter(|&&o| o).count()
    }

    /// Whether every solute molecule lies inside the box.
    pub fn solute_inside(&self) -> bool {
        let k = &self.kin;
        (0..self.solute.len()).all(|j| {
            (0.0..=k.width_x).contains(&self.solute.x[j])
                && (0.0..=k.width_y).contains(&self.solute.y[j])
                && (0.0..=k.width_z).contains(&self.solute.z[j])
        })
    }

    fn inject_due(&mut self) {
        while let Some(&(idx, count)) = self.releases.get(self.next_release) {
            if idx != self.step {
                break;
            }
            for _ in 0..count {
                let y = self.rng.gen_range(0.0..=self.kin.width_y);
                let z = self.rng.gen_range(0.0..=self.kin.width_z);
                let to_test = crossings_until_test(&mut self.rng, self.kin.ln_keep_bind);
                self.solute.push(0.0, y, z, self.step, to_test);
            }
            self.released += count;
            self.next_release += 1;
        }
    }

    /// Draw y or z at the start of the current step, given its last known value.
    #[inline]
    fn lateral_before_step(&mut self, last: f64, since: u64, width: f64) -> f64 {
        let elapsed = self.step - 1 - since;
        if elapsed == 0 {
            return last;
        }
        let z: f64 = self.rng.sample(StandardNormal);
        fold(last + self.kin.sigma * (elapsed as f64).sqrt() * z, width)
    }

    /// Binding test for solute molecule `j` crossing x = a from `x0` to `xr`.
    /// Returns the receptor it binds to, if any. On failure y and z are
    /// brought up to date.
    fn binding_test(&mut self, j: usize, x0: f64, xr: f64) -> Option<usize> {
        let k = self.kin.clone();
        let since = self.solute.yz_step[j];
        let y0 = self.lateral_before_step(self.solute.y[j], since, k.width_y);
        let z0 = self.lateral_before_step(self.solute.z[j], since, k.width_z);
        let dy: f64 = k.sigma * self.rng.sample::<f64, _>(StandardNormal);
        let dz: f64 = k.sigma * self.rng.sample::<f64, _>(StandardNormal);
        let f = (k.width_x - x0) / (xr - x0);
        let yc = fold(y0 + f * dy, k.width_y);
        let zc = fold(z0 + f * dz, k.width_z);
        if let Some(r) = self.receptors.locate(yc, zc) {
            if !self.occupied[r] {
                return Some(r);
            }
        }
        self.solute.y[j] = fold(y0 + dy, k.width_y);
        self.solute.z[j] = fold(z0 + dz, k.width_z);
        self.solute.yz_step[j] = self.step;
        None
    }

    fn bind(&mut self, j: usize, receptor: usize) {
        self.occupied[receptor] = true;
        let wait = geometric(&mut self.rng, self.kin.ln_keep_bound);
        self.bound
            .push(Reverse((self.step.saturating_add(wait), receptor as u32)));
        self.solute.swap_remove(j);
    }

    /// Advance one time step and inject any release due at the new step.
    pub fn advance(&mut self) {
        self.step += 1;
        let (sigma, a) = (self.kin.sigma, self.kin.width_x);

        // move; crossings of x = a are reflected provisionally
        let mut crossers = std::mem::take(&mut self.crossers);
        crossers.resize(self.solute.len() + 1, (0, 0.0, 0.0));
        let mut n_cross = 0;
        // a local copy keeps the generator state in registers; the loop body
        // is branch-free apart from the rare double reflection
        let mut rng = self.rng.clone();
        for (j, x) in self.solute.x.iter_mut().enumerate() {
            let x0 = *x;
            let xr = x0 + sigma * rng.sample::<f64, _>(StandardNormal);
            crossers[n_cross] = (j as u32, x0, xr);
            let cross = xr > a;
            n_cross += cross as usize;
            let once = if cross { 2.0 * a - xr } else { xr }.abs();
            *x = if once > a { fold(xr, a) } else { once };
        }
        self.rng = rng;
        crossers.truncate(n_cross);

        // binding tests, highest index first so swap_remove only moves
        // molecules that are already settled
        for &(j, x0, xr) in crossers.iter().rev() {
            let j = j as usize;
            let left = &mut self.solute.to_test[j];
            *left -= 1;
            if *left == 0 {
                *left = crossings_until_test(&mut self.rng, self.kin.ln_keep_bind);
                if let Some(r) = self.binding_test(j, x0, xr) {
                    self.bind(j, r);
                }
            }
        }
        self.crossers = crossers;

        // unbind
        while let Some(&Reverse((when, r))) = self.bound.peek() {
            if when > self.step {
                break;
            }
            self.bound.pop();
            let r = r as usize;
            self.occupied[r] = false;
            let (y, z) = self.receptors.centers()[r];
            let to_test = crossings_until_test(&mut self.rng, self.kin.ln_keep_bind);
            self.solute
                .push((a - sigma).max(0.0), y, z, self.step, to_test);
        }

        // one degradation trial per solute molecule; after a removal the
        // untried molecule swapped into the hole is tried next
        let mut next = 0usize;
        loop {
            let untried = (self.solute.len() - next) as u64;
            if self.degrade_gap > untried {
                self.degrade_gap -= untried;
                break;
            }
            let j = next + (self.degrade_gap - 1) as usize;
            self.solute.swap_remove(j);
            self.degraded += 1;
            next = j;
            self.degrade_gap = geometric(&mut self.rng, self.kin.ln_keep_solute);
        }

        self.inject_due();
    }
}
