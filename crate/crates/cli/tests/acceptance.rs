//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails. Runtime limits are part of each verdict.

use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use sysid_core::bounds::scalar_sample_complexity;
use sysid_core::estimator::ols_fit_trajectory;
use sysid_core::experiments::{bootstrap_median_ci, run_sweep, BOOTSTRAP_RESAMPLES};
use sysid_core::lds::{gramian_series, random_marginally_stable, simulate};
use sysid_core::numerics::{
    gaussian_vector, normal_sf, operator_norm, random_gaussian_matrix, random_orthogonal, random_skew, sym_eigen,
    unit_vector,
};
use sysid_core::packing::{
    build_packing, exp_map_remainder, exp_map_remainder_bound, kl_monte_carlo, trajectory_kl,
};
use sysid_core::smallball::{
    default_martingale_grid, default_tail_grid, exact_block_exceedance, one_step_mgf, one_step_mgf_quadrature,
};
use sysid_core::{BmsbSpec, LinearSystem, Matrix, RngStream, SweepConfig, SweepResult, SystemSpec};

type Verdict = Result<String, String>;

/// Name, check and runtime limit.
type Criterion = (&'static str, fn() -> Verdict, Duration);

fn check(ok: bool, detail: String) -> Verdict {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn scalar_sweep(a: f64, t_grid: &[usize], trials: usize, seed: u64) -> SweepResult {
    let cfg = SweepConfig {
        system_spec: SystemSpec::Scalar { a },
        sigma: 1.0,
        t_grid: t_grid.to_vec(),
        trials,
        delta: 0.1,
        master_seed: seed,
    };
    run_sweep(&cfg).expect("valid sweep")
}

fn c1_three_regimes() -> Verdict {
    let grid = [250, 500, 1000, 2000, 4000];
    let (s09, h09) = scalar_sweep(0.9, &grid, 2000, 101).fitted_slope.ok_or("no slope for a = 0.9")?;
    let (s10, h10) = scalar_sweep(1.0, &grid, 2000, 102).fitted_slope.ok_or("no slope for a = 1.0")?;
    let a: f64 = 1.05;
    let unstable = scalar_sweep(a, &[50, 100, 150, 200], 2000, 103);
    let predicted = a.powi(-50);
    let ratios: Vec<f64> = unstable
        .cells
        .windows(2)
        .map(|w| w[1].median_error / w[0].median_error)
        .collect();
    let ok_a = (-0.60..=-0.40).contains(&s09);
    let ok_b = (-1.15..=-0.85).contains(&s10);
    let ok_c = ratios.iter().all(|&r| r < 1.0 && r / predicted <= 2.0 && predicted / r <= 2.0);
    let ratio_text: Vec<String> = ratios.iter().map(|r| format!("{r:.4}")).collect();
    check(
        ok_a && ok_b && ok_c,
        format!(
            "(a) slope {s09:.3} ± {h09:.3} in [−0.60, −0.40]: {ok_a}; (b) slope {s10:.3} ± {h10:.3} in [−1.15, −0.85]: {ok_b}; \
             (c) ratios [{}] vs 1.05^−50 = {predicted:.4} within ×2: {ok_c}",
            ratio_text.join(", ")
        ),
    )
}

fn c2_unstable_is_easier() -> Verdict {
    let mut summary = Vec::new();
    for (i, &a) in [0.0, 0.5, 0.95, 1.0].iter().enumerate() {
        let r = scalar_sweep(a, &[2000], 2000, 200 + i as u64);
        let cell = &r.cells[0];
        let ci = bootstrap_median_ci(&cell.errors, BOOTSTRAP_RESAMPLES, &RngStream::new(200 + i as u64, u64::MAX));
        summary.push((a, cell.median_error, ci));
    }
    let ok = summary
        .windows(2)
        .all(|w| w[1].1 < w[0].1 && w[1].2 .1 < w[0].2 .0);
    let text: Vec<String> = summary
        .iter()
        .map(|(a, m, (lo, hi))| format!("a = {a}: {m:.3e} [{lo:.3e}, {hi:.3e}]"))
        .collect();
    check(ok, format!("medians with 95% CIs: {}", text.join("; ")))
}

fn c3_gramian_exactness() -> Verdict {
    let mut rng = RngStream::new(300, 0);
    let mut worst: f64 = 0.0;
    for i in 0..200 {
        let d = 1 + i % 8;
        let horizon = 1 + (i * 37) % 200;
        let a = random_marginally_stable(&mut rng, d);
        let sys = LinearSystem::new(a.clone(), 1.0).map_err(|e| e.to_string())?;
        let gs = gramian_series(&sys, horizon).map_err(|e| e.to_string())?;
        let id = Matrix::identity(d);
        for t in 1..=horizon {
            let g = gs.gamma(t);
            let scale = g.max_abs().max(1.0);
            let min_eig = sym_eigen(&(g - &id)).map_err(|e| e.to_string())?.min();
            worst = worst.max(-min_eig / scale);
            if t < horizon {
                let next = gs.gamma(t + 1);
                let recursion = &id + &a.matmul(g).matmul(&a.transpose());
                worst = worst.max((next - &recursion).max_abs() / scale);
                let step = sym_eigen(&(next - g)).map_err(|e| e.to_string())?.min();
                worst = worst.max(-step / scale);
            }
        }
    }
    let ok_exact = worst <= 1e-9;

    let mut worst_cov: f64 = 0.0;
    let trials = 10_000;
    for i in 0..10 {
        let d = 1 + i % 4;
        let horizon = [5, 20][i % 2];
        let sigma2 = 0.5 + i as f64 * 0.25;
        let sys = LinearSystem::new(random_marginally_stable(&mut rng, d), sigma2).map_err(|e| e.to_string())?;
        let gamma = gramian_series(&sys, horizon).map_err(|e| e.to_string())?.gamma(horizon).clone();
        let mut acc = Matrix::zeros(d, d);
        for j in 0..trials {
            let mut r = RngStream::new(301 + i as u64, j);
            let traj = simulate(&sys, horizon, &mut r, None).map_err(|e| e.to_string())?;
            let x = traj.state(horizon);
            for p in 0..d {
                for q in 0..d {
                    acc[(p, q)] += x[p] * x[q];
                }
            }
        }
        let est = acc.scale(1.0 / (trials as f64 * sigma2));
        worst_cov = worst_cov.max((&est - &gamma).frobenius_norm() / gamma.frobenius_norm());
    }
    let ok_cov = worst_cov <= 0.05;
    check(
        ok_exact && ok_cov,
        format!(
            "worst relative violation {worst:.2e} (≤ 1e−9) over 200 systems; worst covariance error {:.2}% (≤ 5%) over 10 systems",
            100.0 * worst_cov
        ),
    )
}

fn c4_sample_complexity_envelope() -> Verdict {
    let trials = 5000;
    let eps = 0.1;
    let mut lines = Vec::new();
    let mut ok = true;
    for (i, &a) in [0.0, 0.5, 0.9].iter().enumerate() {
        for (j, &delta) in [0.1, 0.2].iter().enumerate() {
            let report = scalar_sample_complexity(a, eps, delta).map_err(|e| e.to_string())?;
            let horizon = report.value.ok_or("no horizon")?.ceil() as usize;
            let sys = LinearSystem::scalar(a, 1.0).map_err(|e| e.to_string())?;
            let mut failures = 0usize;
            for t in 0..trials {
                let mut rng = RngStream::new(400 + (2 * i + j) as u64, t as u64);
                let traj = simulate(&sys, horizon, &mut rng, None).map_err(|e| e.to_string())?;
                let fit = ols_fit_trajectory(&traj, Some(&sys)).map_err(|e| e.to_string())?;
                if fit.op_error.unwrap_or(f64::INFINITY) > eps {
                    failures += 1;
                }
            }
            let freq = failures as f64 / trials as f64;
            let limit = delta + 3.0 * (delta / trials as f64).sqrt();
            ok &= freq <= limit;
            lines.push(format!("a = {a}, δ = {delta}: T = {horizon}, freq {freq:.4} ≤ {limit:.4}"));
        }
    }
    check(ok, lines.join("; "))
}

fn c5_bmsb_exactness() -> Verdict {
    let pz = 2.0 * normal_sf(1.0);
    let mut rng = RngStream::new(500, 0);
    let mut worst = f64::INFINITY;
    for i in 0..50 {
        let d = 1 + i % 6;
        let k = 1 + (i * 5) % 16;
        let sigma2 = 0.1 + 3.0 * rng.next_f64();
        let sys = LinearSystem::new(random_marginally_stable(&mut rng, d), sigma2).map_err(|e| e.to_string())?;
        let spec = BmsbSpec::for_lds(&sys, k).map_err(|e| e.to_string())?;
        let scale = 20.0 * rng.next_f64();
        let anchor = gaussian_vector(&mut rng, d, scale);
        let w = unit_vector(&mut rng, d);
        let v = exact_block_exceedance(&sys, &spec, &anchor, &w).map_err(|e| e.to_string())?;
        worst = worst.min(v);
    }
    let ok = worst >= 3.0 / 20.0 - 1e-12 && pz >= 0.3 && (pz - 0.3173).abs() < 5e-5;
    check(
        ok,
        format!("minimum exact exceedance {worst:.6} ≥ 0.15 over 50 systems; 2(1 − Φ(1)) = {pz:.6} ≥ 0.3"),
    )
}

fn c6_concentration_verifiers() -> Verdict {
    let trials = 100_000;
    let tail = default_tail_grid(0.15, trials, 600).map_err(|e| e.to_string())?;
    let mart = default_martingale_grid(trials, 601).map_err(|e| e.to_string())?;
    let failed: Vec<String> = tail
        .iter()
        .chain(&mart)
        .filter(|r| !r.passed)
        .map(|r| format!("{:?}", r.parameters))
        .collect();
    let margin = tail
        .iter()
        .chain(&mart)
        .map(|r| r.theoretical_bound + 3.0 * r.standard_error - r.empirical_prob)
        .fold(f64::INFINITY, f64::min);
    check(
        failed.is_empty(),
        format!(
            "{} tail points and {} martingale points at 10^5 trials, smallest slack {margin:.3e}{}",
            tail.len(),
            mart.len(),
            if failed.is_empty() { String::new() } else { format!("; failed: {}", failed.join(", ")) }
        ),
    )
}

fn c7_packing() -> Verdict {
    let eps0 = 1.0 / 300.0;
    let mut lines = Vec::new();
    let mut ok = true;
    for d in 2..=4 {
        let set = build_packing(d, eps0, &mut RngStream::new(700, d as u64)).map_err(|e| e.to_string())?;
        let mut min_op = f64::INFINITY;
        let mut max_fro: f64 = 0.0;
        let mut max_orth: f64 = 0.0;
        for (i, a) in set.members.iter().enumerate() {
            let aat = a.matmul(&a.transpose());
            max_orth = max_orth.max((&aat - &Matrix::identity(d)).max_abs());
            for b in &set.members[..i] {
                let diff = a - b;
                min_op = min_op.min(operator_norm(&diff));
                max_fro = max_fro.max(diff.frobenius_norm());
            }
        }
        let count_ok = set.members.len() >= 1 << (d - 1);
        ok &= min_op >= eps0 / 4.0 && max_fro <= 4.0 * eps0 && max_orth <= 1e-10 && count_ok;
        lines.push(format!(
            "d = {d}: {} members, min sep {min_op:.3e}, diameter {max_fro:.3e}, orthogonality {max_orth:.1e}",
            set.members.len()
        ));
    }
    check(ok, format!("{} (need ≥ {:.3e}, ≤ {:.3e}, ≤ 1e−10)", lines.join("; "), eps0 / 4.0, 4.0 * eps0))
}

fn c8_kl_agreement() -> Verdict {
    let mut g = RngStream::new(800, 0);
    let one = Matrix::scalar(1.0);
    let mut perturbed = |rho: f64, d: usize, s: f64| {
        let o = random_orthogonal(&mut g, d);
        let a = &o.scale(rho) + &random_gaussian_matrix(&mut g, d, d).scale(s);
        (rho, o, a)
    };
    let (r3, o3, a3) = perturbed(0.9, 3, 0.05);
    let (r2, o2, a2) = perturbed(0.95, 2, 0.02);
    let (r4, o4, a4) = perturbed(1.0, 4, 0.03);
    let cases = [
        (0.0, one.clone(), Matrix::scalar(0.2), 2, Some(0.08)),
        (1.0, one.clone(), Matrix::scalar(1.1), 2, Some(0.03)),
        (0.5, one.clone(), Matrix::scalar(0.3), 20, None),
        (r3, o3, a3, 10, None),
        (r2, o2, a2, 50, None),
        (r4, o4, a4, 5, None),
    ];
    let mut ok = true;
    let mut lines = Vec::new();
    for (i, (rho, o, a, horizon, exact)) in cases.iter().enumerate() {
        let truth = trajectory_kl(*rho, o, a, *horizon).map_err(|e| e.to_string())?;
        if let Some(x) = exact {
            ok &= (truth - x).abs() <= 1e-12;
        }
        let est = kl_monte_carlo(*rho, o, a, *horizon, 100_000, &RngStream::new(801, i as u64))
            .map_err(|e| e.to_string())?;
        let z = (est.estimate - truth) / est.standard_error;
        ok &= z.abs() <= 3.0;
        lines.push(format!("{truth:.4} vs {:.4} (z = {z:+.2})", est.estimate));
    }
    check(ok, lines.join("; "))
}

fn c9_mgf_identity() -> Verdict {
    let mut rng = RngStream::new(900, 0);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let a = 4.0 * rng.next_f64() - 2.0;
        let nu = 1.6 * rng.next_f64() - 0.8;
        let mu = 2.0 * rng.next_f64() - 1.0;
        let x = 4.0 * rng.next_f64() - 2.0;
        let c = one_step_mgf(a, nu, mu, x).map_err(|e| e.to_string())?;
        let q = one_step_mgf_quadrature(a, nu, mu, x).map_err(|e| e.to_string())?;
        worst = worst.max((q / c - 1.0).abs());
    }
    let e_half = one_step_mgf(0.3, 0.0, 1.0, 1.0).map_err(|e| e.to_string())?;
    let root2 = one_step_mgf(0.0, 0.5, 0.0, 1.7).map_err(|e| e.to_string())?;
    let exact_ok = (e_half - 0.5f64.exp()).abs() < 1e-14 && (root2 - 2f64.sqrt()).abs() < 1e-14;
    check(
        worst <= 1e-6 && exact_ok,
        format!("worst relative difference {worst:.2e} over 100 tuples; e^(1/2) = {e_half:.15}, √2 = {root2:.15}"),
    )
}

fn c10_exp_map() -> Verdict {
    let mut rng = RngStream::new(1000, 0);
    let log2 = 2f64.ln();
    let mut violations = 0;
    let mut second = 0;
    for i in 0..500 {
        let d = 2 + i % 7;
        let k_target = 0.5 * rng.next_f64();
        let x = random_skew(&mut rng, d, 1.0);
        let y = random_skew(&mut rng, d, 1.0);
        let x = x.scale(k_target / operator_norm(&x));
        let y = y.scale(k_target * rng.next_f64() / operator_norm(&y));
        let (residual, k) = exp_map_remainder(&x, &y);
        let bound = exp_map_remainder_bound(k);
        if residual > bound {
            violations += 1;
        }
        if 2.0 * k <= log2 {
            second += 1;
            if bound > (2.0 * k).powi(2) || residual > (2.0 * k).powi(2) {
                violations += 1;
            }
        }
    }
    check(
        violations == 0,
        format!("{violations} violations over 500 pairs ({second} within 2K ≤ log 2)"),
    )
}

fn run_cli(dir: &Path, args: &[&str]) -> Result<Vec<u8>, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_sysid"))
        .current_dir(dir)
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!("`sysid {}` exited with {}", args.join(" "), out.status));
    }
    Ok(out.stdout)
}

fn c11_determinism() -> Verdict {
    let cfg = r#"{"system_spec": {"scaled_orthogonal": {"rho": 0.95, "d": 2, "seed": 1}}, "sigma": 1.0,
                  "T_grid": [50, 100, 200], "trials": 200, "delta": 0.1, "master_seed": 9}"#;
    let runs: [(&[&str], &[&str]); 12] = [
        (&["simulate", "--a-matrix", "0.9,0.1;0,0.8", "--T", "100", "--seed", "7", "--out", "traj.csv"], &["traj.csv"]),
        (&["estimate", "--scalar-a", "0.9", "--T", "500", "--seed", "7", "--out", "est.json"], &["est.json"]),
        (&["estimate", "--trajectory", "traj.csv", "--out", "fit.json"], &["fit.json"]),
        (&["gramian", "--a-matrix", "1,0.5;0,1", "--T", "60", "--seed", "7", "--out", "gram.json"], &["gram.json"]),
        (&["bound", "main", "--scalar-a", "0.5", "--T", "1000000", "--out", "bound.json"], &["bound.json"]),
        (&["sweep", "--config", "cfg.json", "--out", "sweep", "--threads", "3"], &["sweep/sweep.csv", "sweep/manifest.json"]),
        (&["regime-report", "--a-grid", "0,0.9,1,1.05", "--T", "200", "--trials", "300", "--seed", "7", "--out", "regime.csv"], &["regime.csv"]),
        (&["verify", "bmsb", "--scalar-a", "0.8", "--k", "4", "--trials", "500", "--seed", "7", "--out", "bmsb.json"], &["bmsb.json"]),
        (&["verify", "smallball", "--trials", "5000", "--seed", "7", "--out", "sb.json"], &["sb.json"]),
        (&["verify", "mgf", "--tuples", "20", "--seed", "7", "--out", "mgf.json"], &["mgf.json"]),
        (&["verify", "kl", "--trials", "5000", "--seed", "7", "--out", "kl.json"], &["kl.json"]),
        (&["verify", "packing", "--d", "3", "--eps0", "0.003", "--seed", "1", "--out", "packing.json"], &["packing.json"]),
    ];
    let mut mismatched = Vec::new();
    let mut snapshots: Vec<Vec<Vec<u8>>> = Vec::new();
    for round in 0..2 {
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        std::fs::write(dir.path().join("cfg.json"), cfg).map_err(|e| e.to_string())?;
        let mut snap = Vec::new();
        for (args, files) in &runs {
            snap.push(run_cli(dir.path(), args)?);
            for f in *files {
                snap.push(std::fs::read(dir.path().join(f)).map_err(|e| format!("{f}: {e}"))?);
            }
        }
        if round == 1 {
            for (i, (a, b)) in snapshots[0].iter().zip(&snap).enumerate() {
                if a != b {
                    mismatched.push(i);
                }
            }
        }
        snapshots.push(snap);
    }
    check(
        mismatched.is_empty(),
        format!(
            "{} commands, {} stdout streams and files compared byte for byte{}",
            runs.len(),
            snapshots[0].len(),
            if mismatched.is_empty() { String::new() } else { format!("; mismatched: {mismatched:?}") }
        ),
    )
}

fn main() -> ExitCode {
    let criteria: [Criterion; 11] = [
        ("scalar three-regime reproduction", c1_three_regimes, Duration::from_secs(120)),
        ("unstable is easier ordering", c2_unstable_is_easier, Duration::MAX),
        ("Gramian exactness", c3_gramian_exactness, Duration::from_secs(60)),
        ("sample-complexity envelope", c4_sample_complexity_envelope, Duration::from_secs(120)),
        ("BMSB exactness", c5_bmsb_exactness, Duration::MAX),
        ("concentration verifiers", c6_concentration_verifiers, Duration::from_secs(120)),
        ("packing certification", c7_packing, Duration::MAX),
        ("KL oracle agreement", c8_kl_agreement, Duration::from_secs(60)),
        ("MGF identity", c9_mgf_identity, Duration::MAX),
        ("exp-map remainder", c10_exp_map, Duration::MAX),
        ("CLI determinism", c11_determinism, Duration::MAX),
    ];
    let mut failures = 0;
    for (i, (name, run, limit)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let verdict = run();
        let elapsed = start.elapsed();
        let in_time = elapsed <= *limit;
        let (passed, detail) = match verdict {
            Ok(d) => (in_time, d),
            Err(d) => (false, d),
        };
        let timing = if *limit == Duration::MAX {
            format!("{:.1} s", elapsed.as_secs_f64())
        } else {
            format!("{:.1} s, limit {} s", elapsed.as_secs_f64(), limit.as_secs())
        };
        println!(
            "{} criterion {:>2} ({name}): {detail} [{timing}]",
            if passed { "PASS" } else { "FAIL" },
            i + 1
        );
        if !passed {
            failures += 1;
        }
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failures, criteria.len());
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
