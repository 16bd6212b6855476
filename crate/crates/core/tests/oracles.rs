//! Monte Carlo estimates and large-system predictions against independently
//! computed reference values (30-digit quadrature, frozen below).

#![allow(clippy::excessive_precision)]

use relaycap::channel::{solve_power, NetworkConfig, SamplingMethod};
use relaycap::experiments::point_to_point_reference;
use relaycap::montecarlo::ergodic_capacity_with;
use relaycap::quad;
use relaycap::rmt::{asymptotic_capacity, mp_cdf, theta_regime_stieltjes};

/// `E[½·log(1 + Pα·g₁g₂/(1 + α·g₁))]`, g₁, g₂ ~ Exp(1), P and α at snr = 10, L = 1.
const SCALAR_CHAIN_CAPACITY: f64 = 0.856694957111852349;
/// `∫₀^∞ log(1 + 10x)·e^{−x} dx`.
const SCALAR_RAYLEIGH_CAPACITY: f64 = 2.01464254470845168;
/// Shannon transform of MP(β = 1) at ρ = 10.
const MP1_SHANNON_AT_10: f64 = 1.88766606146953599;
const MP1_CDF_AT_1: f64 = 0.608997781044229354;
const THETA_ROOT_UNIT: f64 = 0.673174215915420917;

#[test]
fn power_allocation_matches_closed_form() {
    let pw = solve_power(10.0, 1).unwrap();
    assert!((pw.alpha - 0.953462589245592315).abs() < 1e-15);
    assert!((pw.p - 20.4880884817015155).abs() < 1e-12);
}

#[test]
fn scalar_chain_matches_two_dimensional_quadrature() {
    // Independent check of the frozen constant with the crate's quadrature.
    let pw = solve_power(10.0, 1).unwrap();
    let inner = |g1: f64| {
        quad::integrate_to_infinity(
            |g2| 0.5 * (pw.p * pw.alpha * g1 * g2 / (1.0 + pw.alpha * g1)).ln_1p() * (-g2).exp(),
            0.0,
            1e-12,
        )
    };
    let by_quad = quad::integrate_to_infinity(|g1| inner(g1) * (-g1).exp(), 0.0, 1e-11);
    assert!((by_quad - SCALAR_CHAIN_CAPACITY).abs() < 1e-8, "{by_quad}");

    for method in [SamplingMethod::Explicit, SamplingMethod::GramRecursion] {
        let cfg = NetworkConfig::new(1, 1, 1, 1, 10.0).unwrap().with_seed(101);
        let est = ergodic_capacity_with(&cfg, 100_000, method).unwrap();
        let z = (est.mean - SCALAR_CHAIN_CAPACITY) / est.stderr;
        assert!(
            z.abs() <= 3.0,
            "{method:?}: {} ± {} (z = {z})",
            est.mean,
            est.stderr
        );
    }
}

#[test]
fn scalar_point_to_point_matches_quadrature() {
    let by_quad = quad::integrate_to_infinity(|x| (10.0 * x).ln_1p() * (-x).exp(), 0.0, 1e-12);
    assert!((by_quad - SCALAR_RAYLEIGH_CAPACITY).abs() < 1e-9);
    let est = point_to_point_reference(1, 10.0, 100_000, 5).unwrap();
    let z = (est.c0() - SCALAR_RAYLEIGH_CAPACITY) / est.c0_stderr();
    assert!(z.abs() <= 3.0, "{} ± {}", est.c0(), est.c0_stderr());
}

#[test]
fn point_to_point_reference_vanishes_with_snr() {
    let est = point_to_point_reference(4, 1e-12, 10, 1).unwrap();
    assert!(est.c0() < 1e-11);
}

#[test]
fn finite_point_to_point_is_close_to_asymptote() {
    let asym = asymptotic_capacity(1.0, 10.0, 0).unwrap();
    assert!((asym - MP1_SHANNON_AT_10).abs() < 1e-9, "{asym}");
    let est = point_to_point_reference(10, 10.0, 2000, 9).unwrap();
    assert!(
        (est.c0() - asym).abs() <= 0.02 * asym,
        "{} vs {asym}",
        est.c0()
    );
}

#[test]
fn asymptotic_capacity_prelog() {
    let c0 = asymptotic_capacity(1.0, 10.0, 0).unwrap();
    for l in [1, 3, 9] {
        let c = asymptotic_capacity(1.0, 10.0, l).unwrap();
        assert!((c * (l as f64 + 1.0) - c0).abs() < 1e-12);
    }
    assert_eq!(asymptotic_capacity(1.0, 0.0, 2).unwrap(), 0.0);
}

#[test]
fn mp_cdf_and_theta_root_golden_values() {
    assert!((mp_cdf(1.0, 1.0) - MP1_CDF_AT_1).abs() < 1e-9);
    let sol = theta_regime_stieltjes(1.0, 1.0, 1.0).unwrap();
    assert!((sol.g.re - THETA_ROOT_UNIT).abs() < 1e-10, "{}", sol.g);
    assert_eq!(sol.g.im, 0.0);
    assert!(sol.g.re > 0.0 && sol.g.re < 1.0);
}
