use proptest::prelude::*;
use sysid_core::bounds::half_block;
use sysid_core::lds::random_marginally_stable;
use sysid_core::numerics::{gaussian_vector, normal_sf, unit_vector};
use sysid_core::smallball::{
    exact_block_exceedance, martingale_bound, martingale_tail_check, one_step_mgf, one_step_mgf_quadrature,
    smallball_tail_bound, smallball_tail_check, verify_bmsb_lds,
};
use sysid_core::{BmsbSpec, Error, LinearSystem, RngStream};

#[test]
fn exact_exceedance_fifty_systems() {
    let pz = 2.0 * normal_sf(1.0);
    assert!(pz >= 0.3);
    let mut rng = RngStream::new(14, 0);
    for i in 0..50 {
        let d = 1 + i % 5;
        let k = 1 + (i * 3) % 12;
        let sigma2 = 0.25 + 2.0 * rng.next_f64();
        let sys = LinearSystem::new(random_marginally_stable(&mut rng, d), sigma2).unwrap();
        let spec = BmsbSpec::for_lds(&sys, k).unwrap();
        let scale = 10.0 * rng.next_f64();
        let anchor = gaussian_vector(&mut rng, d, scale);
        let w = unit_vector(&mut rng, d);
        let v = exact_block_exceedance(&sys, &spec, &anchor, &w).unwrap();
        assert!(v >= 3.0 / 20.0 - 1e-12, "system {i}: {v}");
        let kp = half_block(k);
        let sharper = pz * (k - kp + 1) as f64 / k as f64;
        assert!(v >= sharper - 1e-12, "system {i}: {v} < {sharper}");
    }
}

#[test]
fn monte_carlo_bmsb_passes() {
    let mut rng = RngStream::new(15, 0);
    let sys = LinearSystem::new(random_marginally_stable(&mut rng, 3), 1.0).unwrap();
    let spec = BmsbSpec::for_lds(&sys, 6).unwrap();
    let anchors = vec![vec![0.0; 3], gaussian_vector(&mut rng, 3, 3.0)];
    let directions = vec![unit_vector(&mut rng, 3), unit_vector(&mut rng, 3)];
    let report = verify_bmsb_lds(&sys, &spec, &anchors, &directions, 4000, 5).unwrap();
    assert!(report.passed);
    assert_eq!(report.cells.len(), 4);
    assert!(report.min_exact >= 0.15);
    for c in &report.cells {
        assert!((c.empirical - c.exact).abs() <= 4.0 * c.standard_error + 1e-3);
    }
    let again = verify_bmsb_lds(&sys, &spec, &anchors, &directions, 4000, 5).unwrap();
    assert_eq!(report, again);

    let bad = vec![vec![2.0, 0.0, 0.0]];
    assert!(verify_bmsb_lds(&sys, &spec, &anchors, &bad, 10, 5).is_err());
}

#[test]
fn tail_check_example_values() {
    assert!((smallball_tail_bound(2, 0.15, 100) - (-0.140_625f64).exp()).abs() < 1e-15);
    let r = smallball_tail_check(0.5, 1.0, 2, 1.0, 0.15, 100, 20_000, 3).unwrap();
    assert!(r.passed);
    assert!((r.theoretical_bound - 0.868_815).abs() < 1e-6);
    let r = smallball_tail_check(0.5, 1.0, 2, 1.0, 0.15, 10_000, 200, 3).unwrap();
    assert_eq!(r.empirical_prob, 0.0);
    assert!(r.theoretical_bound < 1e-6);
}

#[test]
fn tail_checks_on_grid() {
    for &a in &[0.0, 0.5, 0.9, 1.0] {
        for &k in &[1usize, 2, 4] {
            let nu = sysid_core::lds::scalar_gramian(a, half_block(k)).sqrt();
            let r = smallball_tail_check(a, 1.0, k, nu, 0.15, 40, 20_000, 11).unwrap();
            assert!(r.passed, "a = {a}, k = {k}: {r:?}");
        }
    }
    for &a in &[0.0, 0.5, 0.9] {
        for &t in &[10usize, 50] {
            let beta = t as f64 * sysid_core::lds::scalar_gramian(a, t);
            for &level in &[1.0, 2.0, 3.0] {
                let alpha = level * beta.sqrt();
                let r = martingale_tail_check(a, 1.0, t, alpha, beta, 20_000, 12).unwrap();
                assert!(r.passed, "a = {a}, T = {t}, α = {alpha}: {r:?}");
            }
        }
    }
}

#[test]
fn martingale_example() {
    let t = 50;
    let alpha = (2.0 * t as f64 * 10f64.ln()).sqrt();
    let r = martingale_tail_check(0.0, 1.0, t, alpha, t as f64, 100_000, 7).unwrap();
    assert!((r.theoretical_bound - 0.1).abs() < 1e-14);
    assert!(r.passed && r.empirical_prob <= 0.1 + 3.0 * r.standard_error);
    let far = martingale_tail_check(0.0, 1.0, t, 1e3, t as f64, 10_000, 7).unwrap();
    assert_eq!(far.empirical_prob, 0.0);
    assert!(martingale_bound(1e3, 1.0, t as f64) < 1e-300);
}

#[test]
fn mgf_quadrature_hundred_tuples() {
    let mut rng = RngStream::new(16, 0);
    for _ in 0..100 {
        let a = 4.0 * rng.next_f64() - 2.0;
        let nu = 1.6 * rng.next_f64() - 0.8;
        let mu = 2.0 * rng.next_f64() - 1.0;
        let x = 4.0 * rng.next_f64() - 2.0;
        let c = one_step_mgf(a, nu, mu, x).unwrap();
        let q = one_step_mgf_quadrature(a, nu, mu, x).unwrap();
        assert!((q / c - 1.0).abs() <= 1e-6, "({a}, {nu}, {mu}, {x})");
    }
    assert!((one_step_mgf(0.3, 0.0, 1.0, 1.0).unwrap() - 0.5f64.exp()).abs() < 1e-15);
    assert!((one_step_mgf(0.0, 0.5, 0.0, -3.0).unwrap() - 2f64.sqrt()).abs() < 1e-15);
    assert_eq!(one_step_mgf(0.0, 1.5, 0.0, 0.0), Err(Error::NuOutOfRange { nu: 1.5 }));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn mgf_diverges_as_nu_approaches_one(a in -2.0f64..2.0, mu in -1.0f64..1.0, x in -2.0f64..2.0) {
        let lo = one_step_mgf(a, 0.9, mu, x).unwrap();
        let hi = one_step_mgf(a, 0.99, mu, x).unwrap();
        prop_assert!(hi > lo);
    }
}
