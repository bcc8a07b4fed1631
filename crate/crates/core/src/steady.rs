//! Equilibrium of the saturating receptor model after a single release.
//!
//! At steady state the solute is uniform, `c∞ = (N|M| − i∞)/a`, and balance
//! of binding and unbinding gives
//!
//! ```text
//! i² − ((1 + λ)C* + N|M|) i + N|M| C* = 0,    λ = a κ_d / κ_a
//! ```
//!
//! whose smaller root is the equilibrium bound count.

use serde::Serialize;

use crate::config::ChannelConfig;
use crate::error::{ModelError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SteadyStateResult {
    /// i∞.
    pub bound_equilibrium: f64,
    /// c∞ in 1/µm.
    pub solute_equilibrium_conc: f64,
    /// λ = a κ_d / κ_a.
    pub lambda: f64,
}

fn check_domain(cfg: &ChannelConfig, total_released: f64) -> Result<()> {
    if !(cfg.effective_binding_rate() > 0.0) {
        return Err(ModelError::Domain(
            "equilibrium needs a positive binding rate".into(),
        ));
    }
    if !(cfg.unbinding_rate() > 0.0) {
        return Err(ModelError::Domain(
            "equilibrium needs a positive unbinding rate".into(),
        ));
    }
    if cfg.degradation_rate() != 0.0 {
        return Err(ModelError::Domain(
            "with degradation every molecule is eventually lost; equilibrium is zero".into(),
        ));
    }
    if !(total_released.is_finite() && total_released >= 0.0) {
        return Err(ModelError::parameter(
            "total_released",
            format!("{total_released} must be finite and >= 0"),
        ));
    }
    Ok(())
}

/// λ = a κ_d / κ_a.
pub fn lambda(cfg: &ChannelConfig) -> f64 {
    cfg.width_x() * cfg.unbinding_rate() / cfg.effective_binding_rate()
}

/// Smaller root of the equilibrium quadratic, in product-over-sum form.
fn smaller_root(capacity: f64, total: f64, lambda: f64) -> f64 {
    let b = (1.0 + lambda) * capacity + total;
    let prod = total * capacity;
    if prod == 0.0 {
        return 0.0;
    }
    let disc = (b * b - 4.0 * prod).max(0.0);
    2.0 * prod / (b + disc.sqrt())
}

/// Steady state after `total_released` molecules, with κ_e C_E = 0.
pub fn steady_state(cfg: &ChannelConfig, total_released: f64) -> Result<SteadyStateResult> {
    check_domain(cfg, total_released)?;
    let lam = lambda(cfg);
    let i = smaller_root(cfg.receptor_count() as f64, total_released, lam);
    Ok(SteadyStateResult {
        bound_equilibrium: i,
        solute_equilibrium_conc: (total_released - i) / cfg.width_x(),
        lambda: lam,
    })
}

/// Left side of the equilibrium quadratic at `i`.
pub fn quadratic_residual(cfg: &ChannelConfig, total_released: f64, i: f64) -> f64 {
    let c = cfg.receptor_count() as f64;
    let b = (1.0 + lambda(cfg)) * c + total_released;
    i * i - b * i + total_released * c
}

/// Estimate of i∞(N − j) from i∞(N) via the nonlinear scaling law
/// `i∞(N) (N − j) / (N − j i∞(N)/C*)`.
pub fn steady_state_scaled(cfg: &ChannelConfig, n: u64, j: u64) -> Result<f64> {
    if j > n {
        return Err(ModelError::parameter(
            "j",
            format!("{j} exceeds the anchor count {n}"),
        ));
    }
    let anchor = steady_state(cfg, n as f64)?.bound_equilibrium;
    scale_from_anchor(anchor, cfg.receptor_count() as f64, n, j)
}

/// The scaling law applied to a known anchor value `i∞(N)`.
pub fn scale_from_anchor(anchor: f64, capacity: f64, n: u64, j: u64) -> Result<f64> {
    if j > n {
        return Err(ModelError::parameter(
            "j",
            format!("{j} exceeds the anchor count {n}"),
        ));
    }
    if (n as f64) <= capacity {
        log::warn!(
            "scaling law applied with N = {n} not much larger than C* = {capacity}; expect reduced accuracy"
        );
    }
    if j == 0 {
        return Ok(anchor);
    }
    if j == n {
        return Ok(0.0);
    }
    let (n, j) = (n as f64, j as f64);
    Ok(anchor * (n - j) / (n - j * anchor / capacity))
}

/// `(lim_{C*→∞} i∞, lim_{N|M|→∞} i∞) = (N|M| κ_a/(κ_a + a κ_d), C*)`.
pub fn steady_state_limits(cfg: &ChannelConfig, total_released: f64) -> Result<(f64, f64)> {
    check_domain(cfg, total_released)?;
    let ka = cfg.effective_binding_rate();
    let large_capacity = total_released * ka / (ka + cfg.width_x() * cfg.unbinding_rate());
    Ok((large_capacity, cfg.receptor_count() as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn no_degradation(edit: impl FnOnce(&mut crate::config::ChannelSpec)) -> ChannelConfig {
        ChannelConfig::reference()
            .modified(|s| {
                s.degradation_rate = Some(0.0);
                edit(s);
            })
            .unwrap()
    }

    fn kinetics(capacity: i64, kd: f64) -> ChannelConfig {
        let ka = ChannelConfig::reference().effective_binding_rate();
        no_degradation(|s| {
            s.receptor_count = Some(capacity);
            s.receptor_coverage = None;
            // keep coverage physical at very large C*
            s.receptor_radius = Some(1e-6);
            s.effective_binding_rate = Some(ka);
            s.unbinding_rate = Some(kd);
        })
    }

    fn bisect(cfg: &ChannelConfig, total: f64) -> f64 {
        // the quadratic is positive at 0 and non-positive at min(C*, N|M|)
        let (mut lo, mut hi) = (0.0, (cfg.receptor_count() as f64).min(total));
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if quadratic_residual(cfg, total, mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn zero_release_gives_zero() {
        let cfg = no_degradation(|_| {});
        assert_eq!(steady_state(&cfg, 0.0).unwrap().bound_equilibrium, 0.0);
    }

    #[test]
    fn reference_root_matches_bisection() {
        let cfg = no_degradation(|_| {});
        let r = steady_state(&cfg, 1000.0).unwrap();
        assert_relative_eq!(r.bound_equilibrium, bisect(&cfg, 1000.0), max_relative = 1e-10);
        assert_relative_eq!(
            0.02 * r.solute_equilibrium_conc + r.bound_equilibrium,
            1000.0,
            max_relative = 1e-15
        );
    }

    #[test]
    fn vanishing_unbinding_saturates_at_min() {
        let cfg = kinetics(203, 1e-12);
        let i = steady_state(&cfg, 50.0).unwrap().bound_equilibrium;
        assert!((i - 50.0).abs() < 1e-6, "{i}");
    }

    #[test]
    fn domain_errors() {
        let cfg = ChannelConfig::reference();
        assert!(matches!(steady_state(&cfg, 10.0), Err(ModelError::Domain(_))));
        let cfg = kinetics(203, 0.0);
        assert!(matches!(steady_state(&cfg, 10.0), Err(ModelError::Domain(_))));
        let cfg = no_degradation(|s| s.effective_binding_rate = Some(0.0));
        assert!(matches!(steady_state(&cfg, 10.0), Err(ModelError::Domain(_))));
        let cfg = no_degradation(|_| {});
        assert!(steady_state(&cfg, -1.0).is_err());
    }

    #[test]
    fn scaled_endpoints() {
        let cfg = no_degradation(|_| {});
        let exact = steady_state(&cfg, 5000.0).unwrap().bound_equilibrium;
        assert_eq!(steady_state_scaled(&cfg, 5000, 0).unwrap(), exact);
        assert_eq!(steady_state_scaled(&cfg, 5000, 5000).unwrap(), 0.0);
        assert!(steady_state_scaled(&cfg, 5000, 5001).is_err());
    }

    #[test]
    fn scaled_law_tracks_exact_root() {
        let cfg = no_degradation(|_| {});
        let est = steady_state_scaled(&cfg, 5000, 2500).unwrap();
        let exact = steady_state(&cfg, 2500.0).unwrap().bound_equilibrium;
        assert!((est / exact - 1.0).abs() < 0.02, "{est} vs {exact}");
    }

    #[test]
    fn scaled_law_asymptotics() {
        // small i∞: the law reduces to proportional scaling
        let cap = 1e7;
        let got = scale_from_anchor(5.0, cap, 1000, 300).unwrap();
        assert_relative_eq!(got, 5.0 * 0.7, max_relative = 1e-6);
        // i∞ near C*: the estimate stays at i∞
        let got = scale_from_anchor(200.0 * (1.0 - 1e-9), 200.0, 100_000, 500).unwrap();
        assert_relative_eq!(got, 200.0, max_relative = 1e-6);
    }

    #[test]
    fn limits() {
        let cfg = no_degradation(|_| {});
        let (lc, ln) = steady_state_limits(&cfg, 1000.0).unwrap();
        assert_eq!(ln, 203.0);
        let ka = cfg.effective_binding_rate();
        assert_relative_eq!(lc, 1000.0 * ka / (ka + 0.02 * 8.5e-3), max_relative = 1e-15);
        let (lc, _) = steady_state_limits(&kinetics(203, 1e-300), 1000.0).unwrap();
        assert_relative_eq!(lc, 1000.0, max_relative = 1e-12);
    }

    #[test]
    fn limit_consistency() {
        let big_c = kinetics(100_000_000, 8.5e-3);
        let (lc, _) = steady_state_limits(&big_c, 1000.0).unwrap();
        let i = steady_state(&big_c, 1000.0).unwrap().bound_equilibrium;
        assert_relative_eq!(i, lc, max_relative = 1e-4);

        let cfg = no_degradation(|_| {});
        let i = steady_state(&cfg, 1e8).unwrap().bound_equilibrium;
        assert_relative_eq!(i, 203.0, max_relative = 1e-4);
    }

    proptest! {
        #[test]
        fn root_is_valid_and_ordered(
            cap in 1i64..5000,
            total in 0.0f64..1e6,
            kd in 1e-6f64..1.0,
        ) {
            let cfg = kinetics(cap, kd);
            let c = cap as f64;
            let i = steady_state(&cfg, total).unwrap().bound_equilibrium;
            prop_assert!(i >= 0.0);
            prop_assert!(i <= c.min(total) * (1.0 + 1e-12));
            let res = quadratic_residual(&cfg, total, i);
            prop_assert!(res.abs() <= 1e-9 * (total * c).max(1.0), "residual {}", res);
            if i > 0.0 {
                // product of the roots is N|M| C*
                prop_assert!(total * c / i > c);
            }
        }

        #[test]
        fn monotone_in_parameters(
            cap in 1i64..2000,
            total in 1.0f64..1e5,
            kd in 1e-5f64..0.5,
            f in 1.01f64..3.0,
        ) {
            let base = steady_state(&kinetics(cap, kd), total).unwrap().bound_equilibrium;
            let more_n = steady_state(&kinetics(cap, kd), total * f).unwrap().bound_equilibrium;
            let more_c = steady_state(&kinetics(((cap as f64) * f).ceil() as i64, kd), total)
                .unwrap()
                .bound_equilibrium;
            let more_kd = steady_state(&kinetics(cap, kd * f), total).unwrap().bound_equilibrium;
            let slack = 1e-12 * base.max(1.0);
            prop_assert!(more_n >= base - slack);
            prop_assert!(more_c >= base - slack);
            prop_assert!(more_kd <= base + slack);
        }
    }
}
