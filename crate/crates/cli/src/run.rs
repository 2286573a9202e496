use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use anyhow::{bail, ensure, Context, Result};
use serde::Serialize;
use serde_json::{json, Value};
use sysid_core::bounds::{
    diag_logdet_bound, diag_rate_bound, half_block, input_driven_bound, lds_cert, main_theorem_bound,
    orthogonal_lower_bound_t, scalar_lower_bound_t, scalar_mgf_probability, scalar_sample_complexity,
};
use sysid_core::estimator::{ols_fit, ols_fit_trajectory};
use sysid_core::experiments::{regime_report, run_sweep, CSV_HEADER};
use sysid_core::lds::{
    block_length_condition, gramian_series, growth_diagnostic, scalar_gramian, select_block_length, simulate,
};
use sysid_core::numerics::{gaussian_vector, operator_norm, random_gaussian_matrix, random_orthogonal, unit_vector};
use sysid_core::packing::{birge_threshold, build_packing, kl_monte_carlo, trajectory_kl};
use sysid_core::smallball::{
    default_martingale_grid, default_tail_grid, martingale_tail_check, one_step_mgf, one_step_mgf_quadrature,
    smallball_tail_check, verify_bmsb_lds,
};
use sysid_core::{BmsbSpec, BoundReport, Error, Matrix, Regression, RngStream, SweepConfig, TailCheckResult};

use crate::args::*;

/// `println!` that ignores write errors such as a closed pipe.
macro_rules! say {
    ($($t:tt)*) => {{
        let _ = writeln!(std::io::stdout().lock(), $($t)*);
    }};
}

/// Whether a verification held.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Ok,
    VerificationFailed,
}

fn outcome(passed: bool) -> Outcome {
    if passed {
        Outcome::Ok
    } else {
        Outcome::VerificationFailed
    }
}

fn preamble(common: &Common) {
    say!("seed = {}", common.seed);
    let constants: Vec<String> = common.constants().iter().map(|(k, v)| format!("{k} = {v}")).collect();
    say!("constants: {}", constants.join(", "));
}

/// Artifact envelope: command, seed, constants, version and result.
fn artifact(command: &str, common: &Common, result: impl Serialize) -> Result<Value> {
    Ok(json!({
        "command": command,
        "seed": common.seed,
        "constants": common.constants(),
        "version": env!("CARGO_PKG_VERSION"),
        "result": serde_json::to_value(result)?,
    }))
}

fn write_json(path: &Path, value: &Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// Writes the artifact to `out`, or prints it when no path is given.
fn emit(command: &str, common: &Common, result: impl Serialize, out: Option<&Path>) -> Result<()> {
    let value = artifact(command, common, result)?;
    match out {
        Some(path) => {
            write_json(path, &value)?;
            say!("wrote {}", path.display());
        }
        None => say!("{}", serde_json::to_string_pretty(&value)?),
    }
    Ok(())
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "none".to_string(), |x| format!("{x:.6e}"))
}

fn pool(threads: Option<usize>) -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        ensure!(n >= 1, "--threads must be at least 1");
        b = b.num_threads(n);
    }
    Ok(b.build()?)
}

pub fn dispatch(cmd: Command) -> Result<Outcome> {
    match cmd {
        Command::Sweep(a) => sweep(a),
        Command::RegimeReport(a) => regime(a),
        other => pool(Some(1))?.install(|| single_threaded(other)),
    }
}

fn single_threaded(cmd: Command) -> Result<Outcome> {
    match cmd {
        Command::Simulate(a) => simulate_cmd(a),
        Command::Estimate(a) => estimate(a),
        Command::Gramian(a) => gramian(a),
        Command::Bound { which } => match which {
            BoundCommand::Main(a) => bound_main(a),
            BoundCommand::Scalar(a) => bound_scalar(a),
            BoundCommand::Input(a) => bound_input(a),
            BoundCommand::MgfProb(a) => bound_mgf(a),
            BoundCommand::DiagLogdet(a) => bound_diag_logdet(a),
            BoundCommand::DiagRate(a) => bound_diag_rate(a),
        },
        Command::LowerBound { which } => match which {
            LowerBoundCommand::Scalar(a) => lower_scalar(a),
            LowerBoundCommand::Orthogonal(a) => lower_orthogonal(a),
            LowerBoundCommand::Birge(a) => lower_birge(a),
        },
        Command::Verify { which } => match which {
            VerifyCommand::Bmsb(a) => verify_bmsb(a),
            VerifyCommand::Smallball(a) => verify_smallball(a),
            VerifyCommand::Martingale(a) => verify_martingale(a),
            VerifyCommand::Mgf(a) => verify_mgf(a),
            VerifyCommand::Kl(a) => verify_kl(a),
            VerifyCommand::Packing(a) => verify_packing(a),
        },
        Command::Sweep(_) | Command::RegimeReport(_) => unreachable!("dispatched with their own pool"),
    }
}

fn simulate_cmd(args: SimulateArgs) -> Result<Outcome> {
    preamble(&args.common);
    let sys = args.system.build()?;
    let mut rng = RngStream::new(args.common.seed, 0);
    let traj = simulate(&sys, args.horizon, &mut rng, args.x0.as_deref()).context("--x0")?;
    let file = File::create(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let mut w = BufWriter::new(file);
    traj.write_csv(&mut w)?;
    w.flush()?;
    say!(
        "simulated T = {} steps of a {}-dimensional system{}",
        args.horizon,
        sys.dim(),
        if traj.overflowed { " (overflowed)" } else { "" }
    );
    say!("wrote {}", args.out.display());
    Ok(Outcome::Ok)
}

/// States `X_0..X_T` from a trajectory CSV.
fn read_trajectory(path: &Path) -> Result<Vec<Vec<f64>>> {
    let file = File::open(path).with_context(|| format!("--trajectory: opening {}", path.display()))?;
    let mut lines = BufReader::new(file).lines();
    let header = lines.next().context("--trajectory: empty file")??;
    ensure!(header.starts_with("t,"), "--trajectory: expected a header starting with 't,'");
    let mut states = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        let row: Vec<f64> = line
            .split(',')
            .skip(1)
            .map(|v| v.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .with_context(|| format!("--trajectory: row {}", i + 1))?;
        states.push(row);
    }
    ensure!(states.len() >= 2, "--trajectory: need at least two states");
    Ok(states)
}

fn estimate(args: EstimateArgs) -> Result<Outcome> {
    preamble(&args.common);
    let truth = if args.system.is_given() {
        Some(args.system.build()?)
    } else {
        None
    };
    let report = match &args.trajectory {
        Some(path) => {
            let states = read_trajectory(path)?;
            let t = states.len() - 1;
            let x = Matrix::from_rows(&states[..t]).context("--trajectory")?;
            let y = Matrix::from_rows(&states[1..]).context("--trajectory")?;
            let mut report = ols_fit(&Regression::new(x, y)?)?;
            if let Some(sys) = &truth {
                ensure!(
                    sys.input_dim() == 0,
                    "--b-matrix: recorded trajectories carry no inputs"
                );
                ensure!(sys.a.shape() == report.a_hat.shape(), "--a-matrix: shape differs from the trajectory");
                report.op_error = Some(operator_norm(&(&report.a_hat - &sys.a)));
            }
            say!("fitted {} transitions from {}", t, path.display());
            report
        }
        None => {
            let Some(sys) = &truth else {
                bail!("one of --scalar-a, --a-matrix or --trajectory is required");
            };
            let mut rng = RngStream::new(args.common.seed, 0);
            let traj = simulate(sys, args.horizon, &mut rng, None)?;
            say!("fitted {} simulated transitions", args.horizon);
            ols_fit_trajectory(&traj, Some(sys))?
        }
    };
    say!(
        "op_error = {}, sigma_min(X) = {:.6e}, rank_deficient = {}",
        fmt_opt(report.op_error),
        report.sigma_min_x,
        report.rank_deficient
    );
    emit("estimate", &args.common, &report, args.out.as_deref())?;
    Ok(Outcome::Ok)
}

fn gramian(args: GramianArgs) -> Result<Outcome> {
    preamble(&args.common);
    let sys = args.system.build()?;
    let d = sys.dim();
    let t = args.horizon;
    let gs = gramian_series(&sys, t)?;
    let k = match select_block_length(&gs, d, args.delta, args.common.c) {
        Ok(k) => Some(k),
        Err(Error::NoFeasibleK { .. }) => None,
        Err(e) => return Err(e.into()),
    };
    let condition = k.map(|k| {
        let (lhs, rhs) = block_length_condition(&gs, k, d, args.delta, args.common.c);
        json!({ "lhs": lhs, "rhs": rhs })
    });
    let growth = if args.growth_trials > 0 && t >= 2 {
        let rng = RngStream::new(args.common.seed, 1);
        Some(growth_diagnostic(&sys, t, args.growth_trials, &rng)?)
    } else {
        None
    };
    say!(
        "T = {t}: lambda_min(Γ_T) = {:.6e}, lambda_max(Γ_T) = {:.6e}, log det Γ_T = {:.6e}",
        gs.lambda_min[t - 1],
        gs.lambda_max[t - 1],
        gs.log_det[t - 1]
    );
    match k {
        Some(k) => say!("selected block length k = {k}"),
        None => say!("no block length meets the burn-in condition"),
    }
    if let Some(g) = &growth {
        say!("growth exponent = {:.4}, superlinear = {}", g.exponent, g.superlinear);
    }
    let result = json!({
        "T": t,
        "d": d,
        "delta": args.delta,
        "gamma_T": gs.gamma(t),
        "control_gamma_T": gs.control_gamma(t),
        "lambda_min_T": gs.lambda_min[t - 1],
        "lambda_max_T": gs.lambda_max[t - 1],
        "trace_T": gs.trace[t - 1],
        "log_det_T": gs.log_det[t - 1],
        "selected_k": k,
        "burn_in_condition": condition,
        "growth": growth,
    });
    emit("gramian", &args.common, result, args.out.as_deref())?;
    Ok(Outcome::Ok)
}

fn print_bound(report: &BoundReport) {
    match report.value {
        Some(v) => say!("value = {v:.6e}"),
        None if !report.feasible => say!("infeasible: the horizon precondition fails"),
        None => say!("value = none ({})", report.note.as_deref().unwrap_or("no value")),
    }
    if let Some(k) = report.block_length {
        say!("block length k = {k}");
    }
    if let Some(r) = report.regime {
        say!("regime = {}", r.as_str());
    }
}

fn bound_main(args: BoundMainArgs) -> Result<Outcome> {
    preamble(&args.common);
    let sys = args.system.build()?;
    let d = sys.dim();
    let n = args.n.unwrap_or(d);
    let gs = gramian_series(&sys, args.horizon)?;
    let report = match lds_cert(&sys, &gs, args.horizon, args.delta) {
        Ok(mut cert) => {
            cert.p = args.common.p;
            main_theorem_bound(&cert, args.horizon, d, n, sys.sigma(), args.delta)?
        }
        Err(Error::NoFeasibleK { .. }) => BoundReport {
            value: None,
            constants_used: [
                ("p", args.common.p),
                ("sigma", sys.sigma()),
                ("delta", args.delta),
                ("T", args.horizon as f64),
                ("d", d as f64),
                ("n", n as f64),
            ]
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect(),
            block_length: None,
            regime: None,
            feasible: false,
            note: Some("no block length meets the horizon precondition".into()),
        },
        Err(e) => return Err(e.into()),
    };
    print_bound(&report);
    emit("bound main", &args.common, &report, args.out.as_deref())?;
    Ok(Outcome::Ok)
}

fn bound_scalar(args: ScalarBoundArgs) -> Result<Outcome> {
    preamble(&args.common);
    let report = scalar_sample_complexity(args.a, args.eps, args.delta)?;
    print_bound(&report);
    emit("bound scalar", &args.common, &report, args.out.as_deref())?;
    Ok(Outcome::Ok)
}

fn bound_input(args: BoundInputArgs) -> Result<Outcome> {
    preamble(&args.common);
    let sys = args.system.build()?;
    ensure!(sys.input_dim() > 0, "--b-matrix is required for the input-driven bound");
    let gs = gramian_series(&sys, args.horizon)?;
    let k = match args.k {
        Some(k) => {
            ensure!((1..=args.horizon).contains(&k), "--k must lie in [1, T]");
            k
        }
        None => select_block_length(&gs, sys.dim(), args.delta, args.common.c)?,
    };
    let report = input_driven_bound(&sys, &gs, k, args.horizon, args.delta, args.common.c, args.common.big_c)?;
    print_bound(&report);
    emit("bound input", &args.common, &report, args.out.as_deref())?;
    Ok(Outcome::Ok)
}

fn bound_mgf(args: MgfProbArgs) -> Result<Outcome> {
    preamble(&args.common);
    let alpha = args.alpha.unwrap_or(2.0 * args.eps);
    let prob = scalar_mgf_probability(args.a, args.eps, args.horizon, alpha)?;
    say!("P[|â − a| > eps] ≤ {prob:.6e}");
    let result = json!({ "a": args.a, "eps": args.eps, "T": args.horizon, "alpha": alpha, "probability": prob });
    emit("bound mgf-prob", &args.common, result, args.out.as_deref())?;
    Ok(Outcome::Ok)
}

fn bound_diag_logdet(args: DiagLogdetArgs) -> Result<Outcome> {
    preamble(&args.common);
    let blocks = args.blocks.clone().unwrap_or_else(|| vec![1; args.d]);
    let value = diag_logdet_bound(args.cond_s, args.d, args.horizon, args.k, &blocks)?;
    say!("log det(Γ_T Γ_k⁻¹) ≤ {value:.6e}");
    let result = json!({
        "cond_s": args.cond_s, "d": args.d, "T": args.horizon, "k": args.k, "blocks": blocks, "value": value,
    });
    emit("bound diag-logdet", &args.common, result, None)?;
    Ok(Outcome::Ok)
}

fn bound_diag_rate(args: DiagRateArgs) -> Result<Outcome> {
    preamble(&args.common);
    let report = diag_rate_bound(
        args.cond_s,
        args.d,
        args.horizon,
        args.delta,
        args.underline_rho,
        args.common.c,
        args.common.big_c,
    )?;
    print_bound(&report);
    emit("bound diag-rate", &args.common, &report, args.out.as_deref())?;
    Ok(Outcome::Ok)
}

fn lower_scalar(args: ScalarBoundArgs) -> Result<Outcome> {
    preamble(&args.common);
    let report = scalar_lower_bound_t(args.a, args.eps, args.delta)?;
    print_bound(&report);
    emit("lower-bound scalar", &args.common, &report, args.out.as_deref())?;
    Ok(Outcome::Ok)
}

fn lower_orthogonal(args: OrthogonalLowerArgs) -> Result<Outcome> {
    preamble(&args.common);
    let report = orthogonal_lower_bound_t(args.rho, args.d, args.eps, args.delta, args.common.c0)?;
    print_bound(&report);
    emit("lower-bound orthogonal", &args.common, &report, args.out.as_deref())?;
    Ok(Outcome::Ok)
}

fn lower_birge(args: BirgeArgs) -> Result<Outcome> {
    preamble(&args.common);
    let value = birge_threshold(args.n, args.delta).context("--n")?;
    say!("threshold = {value:.6e}");
    let result = json!({ "n_alternatives": args.n, "delta": args.delta, "threshold": value });
    emit("lower-bound birge", &args.common, result, None)?;
    Ok(Outcome::Ok)
}

fn sweep(args: SweepArgs) -> Result<Outcome> {
    preamble(&args.common);
    let text = fs::read_to_string(&args.config).with_context(|| format!("--config: reading {}", args.config.display()))?;
    let cfg = SweepConfig::from_json(&text).context("--config")?;
    say!("master_seed = {}", cfg.master_seed);
    let result = pool(args.threads)?.install(|| run_sweep(&cfg))?;
    fs::create_dir_all(&args.out).with_context(|| format!("--out: creating {}", args.out.display()))?;
    let csv_path = args.out.join("sweep.csv");
    let mut w = BufWriter::new(File::create(&csv_path)?);
    result.write_csv(&mut w)?;
    w.flush()?;
    let mut manifest = result.manifest();
    manifest["constants"] = serde_json::to_value(args.common.constants())?;
    write_json(&args.out.join("manifest.json"), &manifest)?;
    say!("{CSV_HEADER}");
    for c in &result.cells {
        say!(
            "{},{},{:.6e},{:.6e},{:.6e},{},{}",
            c.horizon,
            c.trials,
            c.median_error,
            c.quantile_error,
            c.mean_sigma_min,
            c.overflow_count,
            fmt_opt(c.bound_value)
        );
    }
    match result.fitted_slope {
        Some((s, h)) => say!("log-log slope = {s:.4} ± {h:.4}"),
        None => say!("log-log slope unavailable"),
    }
    say!("regime = {}", result.regime_label);
    say!("wrote {} and {}", csv_path.display(), args.out.join("manifest.json").display());
    Ok(Outcome::Ok)
}

fn regime(args: RegimeArgs) -> Result<Outcome> {
    preamble(&args.common);
    let rows = pool(args.threads)?.install(|| {
        regime_report(
            &args.a_grid,
            args.horizon,
            args.trials,
            args.delta,
            args.common.c,
            args.common.seed,
        )
    })?;
    let mut text = String::from("a,median_err,q_err,predicted_scale,regime,overflow_count\n");
    for r in &rows {
        text.push_str(&format!(
            "{},{:.16e},{:.16e},{:.16e},{},{}\n",
            r.a,
            r.median_error,
            r.quantile_error,
            r.predicted_scale,
            r.regime.as_str(),
            r.overflow_count
        ));
    }
    say!("{text}");
    if let Some(path) = &args.out {
        fs::write(path, &text).with_context(|| format!("--out: writing {}", path.display()))?;
        say!("wrote {}", path.display());
    }
    Ok(Outcome::Ok)
}

fn verify_bmsb(args: BmsbArgs) -> Result<Outcome> {
    preamble(&args.common);
    ensure!(args.anchors >= 1 && args.directions >= 1, "--anchors and --directions must be at least 1");
    let sys = args.system.build()?;
    let d = sys.dim();
    let mut spec = BmsbSpec::for_lds(&sys, args.k).context("--k")?;
    spec.p = args.common.p;
    let mut rng = RngStream::new(args.common.seed, 0);
    let mut anchors = vec![vec![0.0; d]];
    anchors.extend((1..args.anchors).map(|_| gaussian_vector(&mut rng, d, args.anchor_scale)));
    let directions: Vec<Vec<f64>> = (0..args.directions).map(|_| unit_vector(&mut rng, d)).collect();
    let report = verify_bmsb_lds(&sys, &spec, &anchors, &directions, args.trials, args.common.seed)?;
    let exact_ok = report.min_exact >= spec.p - 1e-12;
    say!(
        "min exact exceedance = {:.6}, p = {}, Monte Carlo {}",
        report.min_exact,
        spec.p,
        if report.passed { "passed" } else { "FAILED" }
    );
    emit("verify bmsb", &args.common, &report, args.out.as_deref())?;
    Ok(outcome(report.passed && exact_ok))
}

fn summarize_checks(results: &[TailCheckResult]) -> bool {
    for r in results {
        say!(
            "{} empirical = {:.6e} ± {:.2e}, bound = {:.6e}",
            if r.passed { "ok  " } else { "FAIL" },
            r.empirical_prob,
            r.standard_error,
            r.theoretical_bound
        );
    }
    results.iter().all(|r| r.passed)
}

fn verify_smallball(args: SmallballArgs) -> Result<Outcome> {
    preamble(&args.common);
    let results = if args.grid {
        default_tail_grid(args.common.p, args.trials, args.common.seed)?
    } else {
        let nu = args
            .nu
            .unwrap_or_else(|| args.sigma * scalar_gramian(args.a, half_block(args.k.max(1))).sqrt());
        vec![smallball_tail_check(
            args.a,
            args.sigma,
            args.k,
            nu,
            args.common.p,
            args.horizon,
            args.trials,
            args.common.seed,
        )?]
    };
    let passed = summarize_checks(&results);
    emit("verify smallball", &args.common, &results, args.out.as_deref())?;
    Ok(outcome(passed))
}

fn verify_martingale(args: MartingaleArgs) -> Result<Outcome> {
    preamble(&args.common);
    let results = if args.grid {
        default_martingale_grid(args.trials, args.common.seed)?
    } else {
        let beta = args
            .beta
            .unwrap_or_else(|| args.sigma * args.sigma * args.horizon as f64 * scalar_gramian(args.a, args.horizon));
        let alpha = args.alpha.unwrap_or_else(|| args.sigma * (2.0 * beta * 10f64.ln()).sqrt());
        vec![martingale_tail_check(
            args.a,
            args.sigma,
            args.horizon,
            alpha,
            beta,
            args.trials,
            args.common.seed,
        )?]
    };
    let passed = summarize_checks(&results);
    emit("verify martingale", &args.common, &results, args.out.as_deref())?;
    Ok(outcome(passed))
}

#[derive(Serialize)]
struct MgfRow {
    a: f64,
    nu: f64,
    mu: f64,
    x: f64,
    closed_form: f64,
    quadrature: f64,
    relative_difference: f64,
}

fn verify_mgf(args: MgfArgs) -> Result<Outcome> {
    preamble(&args.common);
    let tuples: Vec<[f64; 4]> = match &args.point {
        Some(p) => {
            ensure!(p.len() == 4, "--point takes four values a,nu,mu,x");
            vec![[p[0], p[1], p[2], p[3]]]
        }
        None => {
            let mut rng = RngStream::new(args.common.seed, 0);
            (0..args.tuples)
                .map(|_| {
                    let mut u = |lo: f64, hi: f64| lo + (hi - lo) * rng.next_f64();
                    [u(-2.0, 2.0), u(-0.8, 0.8), u(-1.0, 1.0), u(-2.0, 2.0)]
                })
                .collect()
        }
    };
    let rows: Vec<MgfRow> = tuples
        .iter()
        .map(|&[a, nu, mu, x]| {
            let closed_form = one_step_mgf(a, nu, mu, x).context("--point")?;
            let quadrature = one_step_mgf_quadrature(a, nu, mu, x)?;
            Ok(MgfRow {
                a,
                nu,
                mu,
                x,
                closed_form,
                quadrature,
                relative_difference: (quadrature / closed_form - 1.0).abs(),
            })
        })
        .collect::<Result<_>>()?;
    let worst = rows.iter().map(|r| r.relative_difference).fold(0.0, f64::max);
    let passed = worst <= args.tol;
    say!(
        "{} tuples, largest relative difference = {worst:.3e} (tolerance {:.1e}): {}",
        rows.len(),
        args.tol,
        if passed { "ok" } else { "FAILED" }
    );
    emit("verify mgf", &args.common, &rows, args.out.as_deref())?;
    Ok(outcome(passed))
}

fn verify_kl(args: KlArgs) -> Result<Outcome> {
    preamble(&args.common);
    ensure!(args.d >= 1, "--d must be at least 1");
    let mut rng = RngStream::new(args.common.seed, 0);
    let o = random_orthogonal(&mut rng, args.d);
    let a = &o.scale(args.rho) + &random_gaussian_matrix(&mut rng, args.d, args.d).scale(args.perturb);
    let truth = trajectory_kl(args.rho, &o, &a, args.horizon)?;
    let est = kl_monte_carlo(args.rho, &o, &a, args.horizon, args.trials, &RngStream::new(args.common.seed, 1))?;
    let passed = (est.estimate - truth).abs() <= 3.0 * est.standard_error;
    say!(
        "closed form = {truth:.6e}, Monte Carlo = {:.6e} ± {:.2e}: {}",
        est.estimate,
        est.standard_error,
        if passed { "ok" } else { "FAILED" }
    );
    let result = json!({
        "rho": args.rho, "d": args.d, "T": args.horizon, "o": o, "a": a,
        "closed_form": truth, "monte_carlo": est, "passed": passed,
    });
    emit("verify kl", &args.common, result, args.out.as_deref())?;
    Ok(outcome(passed))
}

fn verify_packing(args: PackingArgs) -> Result<Outcome> {
    preamble(&args.common);
    ensure!(args.d >= 2, "--d must be at least 2");
    let mut rng = RngStream::new(args.common.seed, 0);
    let set = match build_packing(args.d, args.eps0, &mut rng) {
        Ok(s) => s,
        Err(e @ Error::SeparationViolated(_)) => {
            eprintln!("verification failed: {e}");
            return Ok(Outcome::VerificationFailed);
        }
        Err(e @ Error::Epsilon0TooLarge { .. }) => bail!("--eps0: {e}"),
        Err(e) => return Err(e.into()),
    };
    let eps0 = args.eps0;
    let passed = set.min_op_separation >= eps0 / 4.0
        && set.max_fro_diameter <= 4.0 * eps0
        && set.max_orthogonality_residual <= 1e-10
        && set.members.len() >= 1 << (args.d - 1);
    say!(
        "{} members, min op separation = {:.6e} (≥ {:.6e}), max Frobenius diameter = {:.6e} (≤ {:.6e}), orthogonality residual = {:.1e}: {}",
        set.members.len(),
        set.min_op_separation,
        eps0 / 4.0,
        set.max_fro_diameter,
        4.0 * eps0,
        set.max_orthogonality_residual,
        if passed { "ok" } else { "FAILED" }
    );
    emit("verify packing", &args.common, &set, args.out.as_deref())?;
    Ok(outcome(passed))
}
