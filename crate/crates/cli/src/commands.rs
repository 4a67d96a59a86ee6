//! Subcommand bodies. Each one writes its files under the output directory and
//! a `report.json` holding the effective config, a summary and any checks.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use fdrs_core::certificates::{certify_all, CertifyOptions, RateReport, ReferenceSolution};
use fdrs_core::counterexamples::{
    arbitrarily_slow_instance, default_eta, run_blocks, sublinear_instance, sublinear_xf_lower, sublinear_xh_lower,
    truncation_deficit,
};
use fdrs_core::linalg::Vector;
use fdrs_core::primal_dual::compare_with_fdrs;
use fdrs_core::solver::{run, IterationTrace, LambdaSchedule, SolveConfig, DEFAULT_EPSILON, DEFAULT_FPR_TOL};
use serde_json::{json, Value};

use crate::config::Settings;
use crate::problem::{build, pick_gamma, Built};
use crate::{CertifyArgs, Cli, Command, CounterexampleCmd, PdArgs, ProblemArgs, RunArgs, SolveArgs, Status};

pub const OUT_DIR_ENV: &str = "FDRS_OUT_DIR";
pub const DEFAULT_OUT_DIR: &str = "fdrs-out";
const DEFAULT_MAX_ITER: usize = 1000;
const DEFAULT_PD_ITERS: usize = 1000;
const DEFAULT_PD_TOL: f64 = 1e-10;

pub fn dispatch(cli: Cli) -> Result<Status> {
    let mut s = Settings::load(cli.config.as_deref())?;
    let out = resolve_out_dir(cli.out_dir, std::env::var_os(OUT_DIR_ENV).map(PathBuf::from), &s);
    match cli.command {
        Command::Solve(a) => solve(a, &mut s, &out),
        Command::Certify(a) => certify(a, &mut s, &out),
        Command::Counterexample { which } => counterexample(which, &mut s, &out),
        Command::PdCompare(a) => pd_compare(a, &mut s, &out),
        Command::Spectral(a) => spectral(a, &mut s, &out),
    }
}

/// Flag, then environment, then config file, then `fdrs-out`.
fn resolve_out_dir(flag: Option<PathBuf>, env: Option<PathBuf>, s: &Settings) -> PathBuf {
    flag.or(env)
        .or_else(|| s.file_value("out_dir").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(name);
    let f = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn write_report(dir: &Path, command: &str, s: &Settings, summary: Value, certificates: Value) -> Result<()> {
    let report = json!({
        "command": command,
        "config": s.effective(),
        "summary": summary,
        "certificates": certificates,
    });
    let mut w = create(dir, "report.json")?;
    serde_json::to_writer_pretty(&mut w, &report)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn write_tsv(dir: &Path, name: &str, series: impl Iterator<Item = (usize, f64)>) -> Result<()> {
    let mut w = create(dir, name)?;
    for (k, v) in series {
        writeln!(w, "{k}\t{v:?}")?;
    }
    w.flush()?;
    Ok(())
}

fn write_trace(dir: &Path, t: &IterationTrace) -> Result<()> {
    let mut w = create(dir, "trace.csv")?;
    t.write_csv(&mut w)?;
    w.flush()?;
    Ok(())
}

fn problem_summary(b: &Built) -> Value {
    json!({
        "dim": b.spec.dim(),
        "constraints": b.spec.a.nrows(),
        "inv_beta": 1.0 / b.betas.beta,
        "inv_beta_v": 1.0 / b.betas.beta_v,
        "ratio": b.betas.ratio(),
        "spectral_advisory": b.betas.advisory,
    })
}

/// Runs FDRS from `z0 = 0` with the run flags resolved through the settings.
fn run_fdrs(b: &Built, r: &RunArgs, s: &mut Settings, dense: bool) -> Result<IterationTrace> {
    let p = b.problem();
    let gamma = pick_gamma(p, r.gamma, r.gamma_mode.clone(), s)?;
    let lambda = s.get("lambda", r.lambda, 1.0)?;
    let epsilon = s.get("epsilon", r.epsilon, DEFAULT_EPSILON)?;
    let max_iter = s.get("max_iter", r.max_iter, DEFAULT_MAX_ITER)?;
    let fpr_tol = s.get("fpr_tol", r.fpr_tol, DEFAULT_FPR_TOL)?;
    let stride = if dense { 1 } else { s.get("record_every", r.record_every, 1)? };
    let cfg = SolveConfig::new(gamma, Vector::zeros(p.dim()))
        .with_lambda(LambdaSchedule::Constant(lambda))
        .with_epsilon(epsilon)
        .with_max_iter(max_iter)
        .with_fpr_tol(fpr_tol)
        .with_record_every(stride);
    Ok(run(p, &cfg)?)
}

fn run_summary(b: &Built, t: &IterationTrace) -> Value {
    let last = t.final_record();
    json!({
        "problem": problem_summary(b),
        "gamma": t.gamma,
        "alpha": t.alpha,
        "iterations": t.iterations,
        "converged": t.converged,
        "final_fpr_sq": last.fpr_sq,
        "final_normalized_fpr": last.normalized_fpr(t.gamma),
        "objective_at_x_h": b.spec.objective(&b.reduction.recover(&last.x_h)),
        "objective_at_x_f": b.spec.objective(&b.reduction.recover(&last.x_f)),
        "constraint_residual": (&b.spec.a * b.reduction.recover(&last.x_h) - &b.spec.b).norm(),
    })
}

fn emit_plot_data(dir: &Path, b: &Built, t: &IterationTrace, reference: Option<&ReferenceSolution>) -> Result<()> {
    write_tsv(dir, "fpr.tsv", t.records.iter().map(|r| (r.k, r.fpr_sq)))?;
    let owned;
    let r = match reference {
        Some(r) => r,
        None => {
            owned = ReferenceSolution::compute(b.problem(), &t.z0, t.gamma).context("reference run for objective error")?;
            &owned
        }
    };
    let opt = r.f_star + r.g_star;
    write_tsv(dir, "objective_error.tsv", t.records.iter().map(|rec| (rec.k, (rec.objective_split - opt).abs())))
}

fn solve(a: SolveArgs, s: &mut Settings, out: &Path) -> Result<Status> {
    let b = build(&a.problem, s)?;
    let t = run_fdrs(&b, &a.run, s, false)?;
    write_trace(out, &t)?;
    if a.run.emit_plot_data {
        emit_plot_data(out, &b, &t, None)?;
    }
    let summary = run_summary(&b, &t);
    write_report(out, "solve", s, summary, Value::Null)?;
    println!(
        "solve: {} iterations, converged = {}, final fpr_sq = {:e}, gamma = {}",
        t.iterations,
        t.converged,
        t.final_record().fpr_sq,
        t.gamma
    );
    Ok(Status::Ok)
}

fn report_json(r: &RateReport) -> Value {
    json!({
        "tau_cert": r.tau_cert,
        "all_pass": r.all_pass(),
        "entries": r.entries,
        "skipped": r.skipped,
    })
}

fn certify(a: CertifyArgs, s: &mut Settings, out: &Path) -> Result<Status> {
    let b = build(&a.problem, s)?;
    let t = run_fdrs(&b, &a.run, s, true)?;
    let opts = CertifyOptions {
        lipschitz: s.get_opt("lipschitz", a.lipschitz)?,
        linear_c: s.get_opt("linear_c", a.linear_c)?,
    };
    let reference = ReferenceSolution::compute(b.problem(), &t.z0, t.gamma).context("reference run")?;
    let report = certify_all(b.problem(), &t, &reference, opts)?;
    write_trace(out, &t)?;
    if a.run.emit_plot_data {
        emit_plot_data(out, &b, &t, Some(&reference))?;
    }
    write_report(out, "certify", s, run_summary(&b, &t), report_json(&report))?;
    for e in &report.entries {
        println!(
            "{:<28} {}  worst {:+.3e} at k = {}",
            e.name,
            if e.pass { "pass" } else { "FAIL" },
            e.worst_violation,
            e.at_iteration
        );
    }
    for sk in &report.skipped {
        println!("{:<28} skipped ({})", sk.name, sk.reason);
    }
    Ok(if report.all_pass() { Status::Ok } else { Status::CheckFailed })
}

fn counterexample(which: CounterexampleCmd, s: &mut Settings, out: &Path) -> Result<Status> {
    match which {
        CounterexampleCmd::Sublinear { alpha, a, blocks, k } => {
            let alpha = s.get("alpha", alpha, 0.75)?;
            let a = s.get("a", a, 1.0)?;
            let blocks = s.get("blocks", blocks, 100_000)?;
            let k = s.get("k", k, 300)?;
            let (inst, z0) = sublinear_instance(alpha, a, blocks)?;
            let run = run_blocks(&inst, &z0, k)?;
            let mut w = create(out, "trace.csv")?;
            writeln!(w, "k,z_norm_sq,xh_norm_sq,xh_lower,xf_norm_sq,xf_lower")?;
            let (mut min_h, mut min_f) = (f64::INFINITY, f64::INFINITY);
            for j in 0..=k {
                let (lh, lf) = (sublinear_xh_lower(alpha, j, blocks), sublinear_xf_lower(alpha, a, j, blocks));
                min_h = min_h.min(run.xh_norm_sq[j] / lh);
                min_f = min_f.min(run.xf_norm_sq[j] / lf);
                writeln!(w, "{j},{:?},{:?},{lh:?},{:?},{lf:?}", run.z_norm_sq[j], run.xh_norm_sq[j], run.xf_norm_sq[j])?;
            }
            w.flush()?;
            let decreasing = run.z_norm_sq.windows(2).all(|p| p[1] < p[0]);
            let pass = min_h >= 1.0 && min_f >= 1.0 && decreasing;
            let summary = json!({
                "truncation_deficit": truncation_deficit(alpha, k, blocks),
                "min_ratio_xh_to_bound": min_h,
                "min_ratio_xf_to_bound": min_f,
                "z_norm_strictly_decreasing": decreasing,
            });
            let checks = json!([
                {"name": "x_h lower bound", "pass": min_h >= 1.0},
                {"name": "x_f lower bound", "pass": min_f >= 1.0},
                {"name": "strong convergence", "pass": decreasing},
            ]);
            write_report(out, "counterexample sublinear", s, summary, checks)?;
            println!("sublinear: min ||x_h||^2/bound = {min_h:.6}, min ||x_f||^2/bound = {min_f:.6}, ||z|| decreasing = {decreasing}");
            Ok(if pass { Status::Ok } else { Status::CheckFailed })
        }
        CounterexampleCmd::Slow { exponent, a, k_max, eta } => {
            let exponent = s.get("exponent", exponent, 0.25)?;
            let a = s.get("a", a, 0.0)?;
            let k_max = s.get("k_max", k_max, 200)?;
            let eta = s.get("eta", eta, default_eta(a))?;
            let f = |t: f64| (t + 2.0).powf(-exponent);
            let (inst, z0, sched) = arbitrarily_slow_instance(f, a, k_max, eta)?;
            let run = run_blocks(&inst, &z0, k_max)?;
            let inv_e = (-1.0f64).exp();
            let mut w = create(out, "trace.csv")?;
            writeln!(w, "k,z_norm,lower")?;
            let mut min_ratio = f64::INFINITY;
            for k in 0..=k_max {
                let (zn, lower) = (run.z_norm_sq[k].sqrt(), inv_e * f(k as f64));
                if k >= 1 {
                    min_ratio = min_ratio.min(zn / lower);
                }
                writeln!(w, "{k},{zn:?},{lower:?}")?;
            }
            w.flush()?;
            let summary = json!({
                "blocks": inst.blocks(),
                "schedule_n": sched.n,
                "min_ratio_to_bound": min_ratio,
            });
            let pass = min_ratio >= 1.0;
            write_report(out, "counterexample slow", s, summary, json!([{"name": "slow lower bound", "pass": pass}]))?;
            println!("slow: {} blocks, min ||z^k||/(F(k)/e) = {min_ratio:.6}", inst.blocks());
            Ok(if pass { Status::Ok } else { Status::CheckFailed })
        }
    }
}

fn pd_compare(a: PdArgs, s: &mut Settings, out: &Path) -> Result<Status> {
    let b = build(&a.problem, s)?;
    let p = b.problem();
    let gamma = pick_gamma(p, a.gamma, a.gamma_mode.clone(), s)?;
    let iters = s.get("iters", a.iters, DEFAULT_PD_ITERS)?;
    let tol = s.get("tol", a.tol, DEFAULT_PD_TOL)?;
    let (trace, _, rep) = compare_with_fdrs(p, &Vector::zeros(p.dim()), gamma, iters)?;
    write_trace(out, &trace)?;
    let pass = rep.within(tol);
    let summary = json!({"problem": problem_summary(&b), "gamma": gamma, "iterations": iters});
    write_report(out, "pd-compare", s, summary, json!({"pass": pass, "equivalence": rep}))?;
    println!(
        "pd-compare: max x_f deviation {:e}, max y deviation {:e}, {}",
        rep.max_xf_deviation,
        rep.max_y_deviation,
        if pass { "within tolerance" } else { "OUT OF TOLERANCE" }
    );
    Ok(if pass { Status::Ok } else { Status::CheckFailed })
}

fn spectral(a: ProblemArgs, s: &mut Settings, out: &Path) -> Result<Status> {
    let b = build(&a, s)?;
    let e = &b.betas;
    let summary = json!({
        "problem": problem_summary(&b),
        "power_iterations_q": e.lambda_max_q.iterations,
        "power_iterations_pqp": e.lambda_max_pqp.iterations,
        "residual_q": e.lambda_max_q.residual,
        "residual_pqp": e.lambda_max_pqp.residual,
    });
    write_report(out, "spectral", s, summary, Value::Null)?;
    println!("1/beta = {}", 1.0 / e.beta);
    println!("1/beta_V = {}", 1.0 / e.beta_v);
    println!("ratio = {}", e.ratio());
    if let Some(adv) = &e.advisory {
        println!("note: {adv}");
    }
    Ok(Status::Ok)
}
