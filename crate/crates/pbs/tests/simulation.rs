use dmc_core::config::{ChannelConfig, ReleaseSchedule};
use dmc_core::steady;
use dmc_pbs::*;

fn plan(horizon: f64, every: f64) -> RunPlan {
    RunPlan {
        time_step: 0.01,
        horizon,
        record_every: Some(every),
        sample_times: vec![],
    }
}

#[test]
fn molecules_and_receptors_balance_every_step() {
    let cfg = ChannelConfig::reference().modified(|s| s.degradation_rate = Some(5e-3)).unwrap();
    let schedule = ReleaseSchedule::uniform(150, &[0.0, 50.0]).unwrap();
    let mut w = World::new(&cfg, &schedule, 0.01, 11, 0).unwrap();
    let mut ever_bound = false;
    while w.time() < 200.0 {
        w.advance();
        let c = w.counts();
        assert_eq!(
            c.bound as u64 + c.solute as u64 + c.degraded as u64,
            w.released()
        );
        assert_eq!(c.bound as usize, w.occupied_receptors());
        assert!(c.bound as usize <= w.receptors().len());
        ever_bound |= c.bound > 0;
    }
    assert!(w.solute_inside());
    assert_eq!(w.released(), 300);
    assert!(ever_bound);
}

#[test]
fn no_binding_without_intrinsic_rate() {
    let cfg = ChannelConfig::reference()
        .modified(|s| s.intrinsic_binding_rate = Some(0.0))
        .unwrap();
    let rec = simulate(&cfg, &ReleaseSchedule::single(500), &plan(100.0, 1.0), 3, 0).unwrap();
    assert!(rec.trace.iter().all(|c| c.bound == 0));
}

#[test]
fn degradation_alone_decays_exponentially() {
    let rate = 1e-2;
    let cfg = ChannelConfig::reference()
        .modified(|s| {
            s.intrinsic_binding_rate = Some(0.0);
            s.degradation_rate = Some(rate);
        })
        .unwrap();
    let n = 2000.0;
    let res = ensemble(&cfg, &ReleaseSchedule::single(2000), &plan(100.0, 50.0), 40, 5).unwrap();
    for (k, &t) in res.times.iter().enumerate() {
        let expected = n * (-rate * t).exp();
        let rel = (res.total_mean[k] - expected).abs() / expected;
        assert!(rel < 0.02, "t={t}: {} vs {expected}", res.total_mean[k]);
    }
}

#[test]
fn late_bound_count_matches_equilibrium() {
    let cfg = ChannelConfig::reference().modified(|s| s.degradation_rate = Some(0.0)).unwrap();
    let res = ensemble(&cfg, &ReleaseSchedule::single(1000), &plan(600.0, 5.0), 20, 9).unwrap();
    let window: Vec<f64> = res
        .times
        .iter()
        .zip(&res.bound_mean)
        .filter(|(t, _)| **t >= 400.0)
        .map(|(_, m)| *m)
        .collect();
    let mean = window.iter().sum::<f64>() / window.len() as f64;
    let eq = steady::steady_state(&cfg, 1000.0).unwrap().bound_equilibrium;
    assert!((mean - eq).abs() / eq < 0.03, "{mean} vs {eq}");
}

#[test]
fn halving_time_step_keeps_mean() {
    let cfg = ChannelConfig::reference();
    let schedule = ReleaseSchedule::single(500);
    let coarse = RunPlan { time_step: 0.02, ..plan(200.0, 100.0) };
    let a = ensemble(&cfg, &schedule, &coarse, 24, 21).unwrap();
    let b = ensemble(&cfg, &schedule, &plan(200.0, 100.0), 24, 22).unwrap();
    for k in 1..a.times.len() {
        let se = a.bound_sem(k).hypot(b.bound_sem(k));
        let d = (a.bound_mean[k] - b.bound_mean[k]).abs();
        assert!(d < 4.0 * se, "t={}: {} vs {}", a.times[k], a.bound_mean[k], b.bound_mean[k]);
    }
}

#[test]
fn seeds_reproduce_and_differ() {
    let cfg = ChannelConfig::reference();
    let s = ReleaseSchedule::single(300);
    let p = plan(40.0, 1.0);
    let a = simulate(&cfg, &s, &p, 1, 4).unwrap();
    let b = simulate(&cfg, &s, &p, 1, 4).unwrap();
    let c = simulate(&cfg, &s, &p, 2, 4).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn ensemble_independent_of_thread_count() {
    let cfg = ChannelConfig::reference();
    let s = ReleaseSchedule::single(200);
    let p = RunPlan {
        sample_times: vec![20.0, 40.0],
        ..plan(40.0, 2.0)
    };
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| ensemble(&cfg, &s, &p, 12, 77).unwrap())
    };
    let one = run(1);
    assert_eq!(one, run(3));
    assert_eq!(one.histograms[1].total(), 12);
}

#[test]
fn calibration_without_binding_gives_zero_ratio() {
    let cfg = ChannelConfig::reference()
        .modified(|s| s.intrinsic_binding_rate = Some(0.0))
        .unwrap();
    let settings = CalibrationSettings {
        releases: vec![100],
        runs: 2,
        window: (10.0, 20.0),
        ..Default::default()
    };
    let r = calibrate_homogenization(&cfg, &settings).unwrap();
    assert_eq!(r.ratio, 0.0);
    assert_eq!(r.effective_binding_rate, 0.0);
}

#[test]
fn off_grid_times_rejected() {
    let cfg = ChannelConfig::reference();
    let bad = RunPlan { sample_times: vec![1.005], ..plan(10.0, 1.0) };
    assert!(matches!(
        simulate(&cfg, &ReleaseSchedule::single(10), &bad, 0, 0),
        Err(PbsError::Parameter { .. })
    ));
    let early = plan(500.0, 1.0);
    let late = ReleaseSchedule::uniform(10, &[0.0, 1000.0]).unwrap();
    assert!(simulate(&cfg, &late, &early, 0, 0).is_err());
}
