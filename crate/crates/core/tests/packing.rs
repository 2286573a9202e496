use proptest::prelude::*;
use sysid_core::lds::scalar_gramian;
use sysid_core::numerics::{operator_norm, random_gaussian_matrix, random_orthogonal, random_skew};
use sysid_core::packing::{
    ball_packing, birge_threshold, build_packing, exp_map_remainder, exp_map_remainder_bound, kl_monte_carlo,
    skew_lift, trajectory_kl,
};
use sysid_core::{Error, Matrix, PackingSet, RngStream};

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

#[test]
fn ball_packings_certified() {
    let mut rng = RngStream::new(1, 0);
    let line = ball_packing(1, 3, &mut rng).unwrap();
    assert_eq!(line.points.len(), 3);
    let cube = ball_packing(3, 8, &mut rng).unwrap();
    assert_eq!(cube.points.len(), 8);
    for p in [&line, &cube] {
        let mut min = f64::INFINITY;
        for (i, a) in p.points.iter().enumerate() {
            assert!(a.iter().map(|v| v * v).sum::<f64>() <= 1.0);
            for b in &p.points[..i] {
                min = min.min(dist(a, b));
            }
        }
        assert!(min >= 0.5);
        assert_eq!(min, p.min_separation);
    }
    assert!(matches!(
        ball_packing(1, 5, &mut rng),
        Err(Error::PackingStalled { found: 3 | 4, target: 5, .. })
    ));
}

#[test]
fn group_packings_certified() {
    let eps0 = 1.0 / 300.0;
    for d in 2..=4 {
        let mut rng = RngStream::new(7, d as u64);
        let set = build_packing(d, eps0, &mut rng).unwrap();
        assert!(set.members.len() >= 1 << (d - 1));
        let mut min_op = f64::INFINITY;
        let mut max_fro: f64 = 0.0;
        for (i, a) in set.members.iter().enumerate() {
            assert!(a.orthogonality_residual() <= 1e-10);
            for b in &set.members[..i] {
                let diff = a - b;
                min_op = min_op.min(operator_norm(&diff));
                max_fro = max_fro.max(diff.frobenius_norm());
            }
        }
        assert!(min_op >= eps0 / 4.0 - 1e-10 && max_fro <= 4.0 * eps0 + 1e-10);
        assert_eq!(min_op, set.min_op_separation);

        let json = serde_json::to_string(&set).unwrap();
        let back: PackingSet = serde_json::from_str(&json).unwrap();
        assert_eq!(back, set);
    }
    let mut rng = RngStream::new(7, 0);
    assert_eq!(
        build_packing(3, 0.01, &mut rng),
        Err(Error::Epsilon0TooLarge { epsilon0: 0.01 })
    );
}

#[test]
fn packing_kl_within_diameter_budget() {
    let eps0 = 1.0 / 300.0;
    for d in 2..=4 {
        let set = build_packing(d, eps0, &mut RngStream::new(9, d as u64)).unwrap();
        for &rho in &[0.5, 0.9, 1.0] {
            for &horizon in &[10usize, 100] {
                let gammas: f64 = (1..=horizon).map(|t| scalar_gramian(rho, t)).sum();
                let budget = (4.0 * rho * eps0).powi(2) * gammas;
                for oi in &set.members {
                    for oj in &set.members {
                        let kl = trajectory_kl(rho, oi, &oj.scale(rho), horizon).unwrap();
                        assert!(kl <= budget * (1.0 + 1e-12));
                    }
                }
            }
        }
    }
}

#[test]
fn kl_closed_form_examples() {
    let one = Matrix::scalar(1.0);
    assert!((trajectory_kl(0.0, &one, &Matrix::scalar(0.2), 2).unwrap() - 0.08).abs() < 1e-15);
    assert!((trajectory_kl(1.0, &one, &Matrix::scalar(1.1), 2).unwrap() - 0.03).abs() < 1e-14);
    let o = random_orthogonal(&mut RngStream::new(2, 0), 3);
    assert_eq!(trajectory_kl(0.7, &o, &o.scale(0.7), 5).unwrap(), 0.0);
    let skewed = Matrix::from_rows(&[[1.0, 0.1], [0.0, 1.0]]).unwrap();
    assert!(matches!(
        trajectory_kl(1.0, &skewed, &skewed, 2),
        Err(Error::NotOrthogonal { .. })
    ));
}

#[test]
fn kl_monte_carlo_agrees_with_closed_form() {
    let rng = RngStream::new(4, 0);
    let mut g = RngStream::new(4, 1);
    let o3 = random_orthogonal(&mut g, 3);
    let perturbed = &o3.scale(0.9) + &random_gaussian_matrix(&mut g, 3, 3).scale(0.05);
    let one = Matrix::scalar(1.0);
    let cases: Vec<(f64, Matrix, Matrix, usize)> = vec![
        (0.0, one.clone(), Matrix::scalar(0.2), 2),
        (1.0, one.clone(), Matrix::scalar(1.1), 2),
        (0.9, o3.clone(), perturbed, 10),
        (0.5, one.clone(), Matrix::scalar(0.3), 20),
    ];
    for (rho, o, a, horizon) in cases {
        let truth = trajectory_kl(rho, &o, &a, horizon).unwrap();
        let est = kl_monte_carlo(rho, &o, &a, horizon, 100_000, &rng).unwrap();
        assert!((est.estimate - truth).abs() <= 3.0 * est.standard_error, "{truth} vs {est:?}");
        assert_eq!(est.log_likelihood_ratio, 0.5 * est.estimate);
    }
    let same = kl_monte_carlo(0.9, &o3, &o3.scale(0.9), 10, 1000, &rng).unwrap();
    assert!(same.estimate.abs() <= 3.0 * same.standard_error + 1e-12);
}

#[test]
fn birge_values() {
    assert!((birge_threshold(2, 0.1).unwrap() - 0.8 * 10f64.ln()).abs() < 1e-15);
    assert!((birge_threshold(2, 0.1).unwrap() - 1.8421).abs() < 1e-4);
    assert!((birge_threshold(511, 0.05).unwrap() - 0.9 * 5110f64.ln()).abs() < 1e-13);
    assert!(birge_threshold(1, 0.5 - 1e-9).unwrap() < 1e-8);
    assert!(birge_threshold(0, 0.1).is_err());
}

#[test]
fn exp_map_inequalities_five_hundred_pairs() {
    let mut rng = RngStream::new(10, 0);
    let log2 = 2f64.ln();
    for i in 0..500 {
        let d = 2 + i % 6;
        let k_target = 0.3 * rng.next_f64();
        let mut x = random_skew(&mut rng, d, 1.0);
        let mut y = random_skew(&mut rng, d, 1.0);
        let nx = operator_norm(&x);
        let ny = operator_norm(&y);
        x = x.scale(k_target / nx);
        y = y.scale(k_target * rng.next_f64() / ny);
        let (residual, k) = exp_map_remainder(&x, &y);
        let bound = exp_map_remainder_bound(k);
        assert!(residual <= bound, "pair {i}: {residual} > {bound}");
        if 2.0 * k <= log2 {
            assert!(residual <= (2.0 * k).powi(2));
            assert!(bound <= (2.0 * k).powi(2));
        }
    }
}

proptest! {
    #[test]
    fn skew_lift_linear_and_normed(w1 in prop::collection::vec(-0.5f64..0.5, 3), w2 in prop::collection::vec(-0.5f64..0.5, 3), eps in 1e-4f64..1e-2) {
        let diff: Vec<f64> = w1.iter().zip(&w2).map(|(a, b)| a - b).collect();
        let lhs = &skew_lift(&w1, eps) - &skew_lift(&w2, eps);
        prop_assert!((&lhs - &skew_lift(&diff, eps)).max_abs() <= 4.0 * f64::EPSILON * eps);
        let norm = w1.iter().map(|v| v * v).sum::<f64>().sqrt();
        let m = skew_lift(&w1, eps);
        prop_assert!((operator_norm(&m) - eps * norm).abs() <= 1e-14);
        prop_assert!((m.frobenius_norm() - 2f64.sqrt() * eps * norm).abs() <= 1e-14);
    }
}
