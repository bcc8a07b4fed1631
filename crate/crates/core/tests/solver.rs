use dmc_core::config::{ChannelConfig, ChannelSpec, ReleaseSchedule, SolverSettings};
use dmc_core::ssd::{self, BoundaryLaw, SsdSolver};
use dmc_core::steady;
use dmc_core::trace::{is_isi_free, SignalTrace};

fn reference() -> ChannelConfig {
    ChannelConfig::reference()
}

/// Reference kinetics with capacity and unbinding rate replaced and no degradation.
fn fixed_kinetics(capacity: i64, kd: f64) -> ChannelConfig {
    let ka = reference().effective_binding_rate();
    reference()
        .modified(|s: &mut ChannelSpec| {
            s.receptor_count = Some(capacity);
            s.receptor_radius = Some(1e-6);
            s.receptor_coverage = None;
            s.effective_binding_rate = Some(ka);
            s.unbinding_rate = Some(kd);
            s.degradation_rate = Some(0.0);
        })
        .unwrap()
}

fn bisect_root(cfg: &ChannelConfig, total: f64) -> f64 {
    let (mut lo, mut hi) = (0.0, (cfg.receptor_count() as f64).min(total));
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if steady::quadratic_residual(cfg, total, mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn settings(t: f64, q: usize, horizon: f64) -> SolverSettings {
    SolverSettings {
        eigenmodes: q,
        sample_interval: t,
        horizon,
    }
}

fn peak_in(trace: &SignalTrace, from: f64, to: f64) -> f64 {
    let (a, b) = (trace.index_at(from), trace.index_at(to));
    trace.bound[a..b].iter().copied().fold(f64::MIN, f64::max)
}

#[test]
fn late_time_matches_equilibrium_root() {
    for &(n, c, kd) in &[(1000u64, 203i64, 8.5e-3), (50, 1000, 1e-2), (16000, 50, 1e-3)] {
        let cfg = fixed_kinetics(c, kd);
        let trace = ssd::run(
            &cfg,
            &ReleaseSchedule::single(n),
            &settings(0.1, 100, 20_000.0),
        )
        .unwrap();
        let late = *trace.bound.last().unwrap();
        let root = bisect_root(&cfg, n as f64);
        assert!((late / root - 1.0).abs() < 1e-3, "N={n} C*={c}: {late} vs {root}");
    }
}

#[test]
fn reference_single_release_converges_to_root_at_long_horizon() {
    let cfg = reference().modified(|s| s.degradation_rate = Some(0.0)).unwrap();
    let trace = ssd::run(
        &cfg,
        &ReleaseSchedule::single(1000),
        &settings(0.1, 100, 100_000.0),
    )
    .unwrap();
    let root = bisect_root(&cfg, 1000.0);
    assert!((trace.bound.last().unwrap() / root - 1.0).abs() < 1e-3);
}

#[test]
fn conservation_without_degradation() {
    let cfg = fixed_kinetics(203, 8.5e-3);
    let schedule = ReleaseSchedule::uniform(1000, &[0.0, 100.0, 250.0]).unwrap();
    let trace = ssd::run(&cfg, &schedule, &settings(0.1, 100, 2000.0)).unwrap();
    for k in 0..trace.len() {
        let released = schedule.released_by(trace.time(k) + 1e-9) as f64;
        let sum = trace.solute[k] + trace.bound[k];
        assert!((sum / released - 1.0).abs() < 1e-6, "k = {k}");
        assert_eq!(trace.total_molecules[k], released);
    }
}

#[test]
fn bound_stays_within_capacity() {
    let schedule = ReleaseSchedule::single(16000);
    let trace = ssd::run(&reference(), &schedule, &settings(0.1, 100, 2000.0)).unwrap();
    let cap = reference().receptor_count() as f64;
    assert!(trace.bound.iter().all(|&i| (0.0..=cap).contains(&i)));
}

fn max_violation(trace: &SignalTrace, cap: f64) -> f64 {
    trace
        .bound
        .iter()
        .map(|&i| (-i).max(i - cap).max(0.0))
        .fold(0.0, f64::max)
}

#[test]
fn halving_interval_does_not_increase_violation() {
    let cfg = reference()
        .modified(|s| s.effective_binding_rate = Some(1e-3))
        .unwrap();
    let cap = cfg.receptor_count() as f64;
    let schedule = ReleaseSchedule::single(16000);
    let mut prev = f64::INFINITY;
    for t in [0.2, 0.1, 0.05] {
        let trace = ssd::run(&cfg, &schedule, &settings(t, 100, 200.0)).unwrap();
        let v = max_violation(&trace, cap);
        assert!(v <= prev, "T = {t}: {v} > {prev}");
        prev = v;
    }
}

#[test]
fn peak_converges_in_truncation() {
    let schedule = ReleaseSchedule::single(1000);
    let p100 = ssd::run(&reference(), &schedule, &settings(0.1, 100, 600.0))
        .unwrap()
        .peak()
        .1;
    let p200 = ssd::run(&reference(), &schedule, &settings(0.1, 200, 600.0))
        .unwrap()
        .peak()
        .1;
    assert!((p200 / p100 - 1.0).abs() < 1e-3, "{p100} vs {p200}");
}

#[test]
fn peak_converges_in_sample_interval() {
    let schedule = ReleaseSchedule::single(1000);
    let p1 = ssd::run(&reference(), &schedule, &settings(0.1, 100, 600.0))
        .unwrap()
        .peak()
        .1;
    let p2 = ssd::run(&reference(), &schedule, &settings(0.05, 100, 600.0))
        .unwrap()
        .peak()
        .1;
    assert!((p2 / p1 - 1.0).abs() < 5e-3, "{p1} vs {p2}");
}

#[test]
fn large_capacity_recovers_linear_boundary() {
    let base = reference();
    let ka = base.effective_binding_rate();
    let cfg = base
        .modified(|s| {
            s.receptor_count = Some(203_000_000);
            s.receptor_radius = Some(1e-7);
            s.receptor_coverage = None;
            s.effective_binding_rate = Some(ka);
        })
        .unwrap();
    let schedule = ReleaseSchedule::single(1000);
    let s = settings(0.1, 100, 1000.0);
    let sat = ssd::run(&cfg, &schedule, &s).unwrap();
    let lin = ssd::run_linear_reference(&cfg, &schedule, &s).unwrap();
    for (a, b) in sat.bound.iter().zip(&lin.bound) {
        assert!((a - b).abs() <= 1e-3 * b.abs(), "{a} vs {b}");
    }
}

#[test]
fn linear_reference_steady_state() {
    let cfg = fixed_kinetics(203, 8.5e-3);
    let trace = ssd::run_linear_reference(
        &cfg,
        &ReleaseSchedule::single(1000),
        &settings(0.1, 100, 20_000.0),
    )
    .unwrap();
    let ka = cfg.effective_binding_rate();
    let expect = 1000.0 * ka / (ka + cfg.width_x() * cfg.unbinding_rate());
    assert!((trace.bound.last().unwrap() / expect - 1.0).abs() < 1e-3);
}

#[test]
fn saturation_damps_peak_roughly_in_proportion_to_capacity() {
    let schedule = ReleaseSchedule::single(1000);
    let s = settings(0.1, 100, 1000.0);
    let mut peaks = Vec::new();
    for c in [102i64, 203, 406] {
        let cfg = reference()
            .modified(|sp| sp.receptor_count = Some(c))
            .unwrap();
        let sat = ssd::run(&cfg, &schedule, &s).unwrap().peak().1;
        let lin = ssd::run_linear_reference(&cfg, &schedule, &s).unwrap().peak().1;
        assert!(sat < lin, "C* = {c}");
        peaks.push(sat);
    }
    let r1 = peaks[1] / peaks[0];
    let r2 = peaks[2] / peaks[1];
    assert!(r1 > 1.6 && r1 < 2.2, "{r1}");
    assert!(r2 > 1.6 && r2 < 2.2, "{r2}");
}

#[test]
fn repeated_release_peaks_grow_less_with_saturation() {
    let schedule = ReleaseSchedule::uniform(4000, &[0.0, 1000.0, 2000.0]).unwrap();
    let s = settings(0.1, 100, 3000.0);
    let sat = ssd::run(&reference(), &schedule, &s).unwrap();
    let lin = ssd::run_linear_reference(&reference(), &schedule, &s).unwrap();
    let growth = |t: &SignalTrace| peak_in(t, 1000.0, 2000.0) / peak_in(t, 0.0, 1000.0);
    assert!(growth(&sat) > 1.0);
    assert!(growth(&lin) > growth(&sat));
    assert!(!is_isi_free(&sat, &schedule, 1.0, 0.01).unwrap());
}

#[test]
fn degradation_ledger_matches_solute_plus_bound_decay() {
    // with degradation, N(t) stays between the solute-only decay and no decay
    let trace = ssd::run(
        &reference(),
        &ReleaseSchedule::single(1000),
        &settings(0.1, 100, 1000.0),
    )
    .unwrap();
    let ke = reference().degradation_rate();
    for k in (0..trace.len()).step_by(500) {
        let n = trace.total_molecules[k];
        let t = trace.time(k);
        assert!(n <= 1000.0 + 1e-9 && n >= 1000.0 * (-ke * t).exp() - 1e-9);
        assert!((trace.solute[k] + trace.bound[k] - n).abs() < 1e-6 * 1000.0);
    }
}

#[test]
fn stepping_api_matches_run() {
    let cfg = reference();
    let solver = SsdSolver::new(&cfg, 100, 0.1, BoundaryLaw::Saturating).unwrap();
    let mut state = solver.initial_state();
    state.inject(1000.0);
    for _ in 0..2000 {
        solver.advance(&mut state, 0.0).unwrap();
    }
    let trace = ssd::run(
        &cfg,
        &ReleaseSchedule::single(1000),
        &settings(0.1, 100, 200.0),
    )
    .unwrap();
    assert_eq!(state.bound, *trace.bound.last().unwrap());
    assert_eq!(state.step_index, 2000);
}
