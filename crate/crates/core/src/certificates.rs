//! Checks every convergence inequality of the method against a recorded trace.
//!
//! Each check scans a dense trace and produces one or more [`CertificateEntry`]
//! values. A point with left side `lhs` and bound `rhs` has the normalized
//! violation `(lhs - rhs) / (|rhs| + floor)`, and the entry passes when the
//! largest violation is at most `tau_cert`. The floors are scale-aware
//! absolute slacks built from `D = ||z0 - z*||` and `||z*||`, so a check is
//! invariant under rescaling the problem.

use serde::Serialize;

use crate::error::{check_dim, FdrsError, Result};
use crate::functions::s_term;
use crate::linalg::{dist, dist_sq, Vector};
use crate::operators::{alpha_fdrs, apply_fdrs, SplitProblem};
use crate::solver::{epsilon_window_upper, run, IterationTrace, LambdaSchedule, SolveConfig, TraceRecord};

pub const TAU_BASE: f64 = 1e-7;
/// Little-o checks compare the tail against the value at this index.
pub const LITTLE_O_EARLY: usize = 10;
pub const LITTLE_O_RATIO: f64 = 0.01;
/// Squared-FPR tolerance of the reference run, relative to `(1 + ||z0||)^2`.
pub const REFERENCE_FPR_TOL: f64 = 1e-26;
pub const REFERENCE_MAX_ITER: usize = 1_000_000;

/// A fixed point `z*` with the quantities the bounds are stated in.
#[derive(Clone, Debug)]
pub struct ReferenceSolution {
    pub z_star: Vector,
    pub x_star: Vector,
    pub subgrad_chi_star: Vector,
    pub grad_h_star: Vector,
    /// `-grad_h* - subgrad_chi*`, the subgradient of `f` the bounds fix.
    pub subgrad_f_star: Vector,
    pub f_star: f64,
    pub g_star: f64,
    pub gamma: f64,
    /// `||T z* - z*||`.
    pub residual: f64,
    /// True when `z*` came from an iterative run rather than a closed form.
    pub numerical: bool,
}

impl ReferenceSolution {
    pub fn from_fixed_point(p: &SplitProblem, z_star: Vector, gamma: f64, numerical: bool) -> Result<Self> {
        check_dim(p.dim(), z_star.len())?;
        let step = apply_fdrs(p, &z_star, gamma)?;
        let residual = dist(&step.z_next, &z_star);
        let tolerance = 1e-10 * (1.0 + z_star.norm());
        if !(residual <= tolerance) {
            return Err(FdrsError::NotOptimal { residual, tolerance });
        }
        let x_star = step.x_h;
        let subgrad_chi_star = step.subgrad_chi;
        let grad_h_star = step.grad_h;
        let subgrad_f_star = -(&grad_h_star + &subgrad_chi_star);
        let f_star = p.f().eval(&x_star)?;
        let g_star = p.g().eval(&x_star)?;
        if !f_star.is_finite() {
            return Err(FdrsError::NotOptimal { residual: f64::INFINITY, tolerance });
        }
        Ok(Self {
            z_star,
            x_star,
            subgrad_chi_star,
            grad_h_star,
            subgrad_f_star,
            f_star,
            g_star,
            gamma,
            residual,
            numerical,
        })
    }

    /// Closed-form reference from a minimizer and its `chi_V` subgradient.
    pub fn from_minimizer(p: &SplitProblem, x_star: &Vector, subgrad_chi_star: &Vector, gamma: f64) -> Result<Self> {
        let z = crate::operators::fixed_point_from_minimizer(p, x_star, subgrad_chi_star, gamma)?;
        Self::from_fixed_point(p, z, gamma, false)
    }

    /// High-accuracy run with `lambda = 1` from `z0`.
    pub fn compute(p: &SplitProblem, z0: &Vector, gamma: f64) -> Result<Self> {
        let tol = REFERENCE_FPR_TOL * (1.0 + z0.norm()).powi(2);
        let cfg = SolveConfig::new(gamma, z0.clone())
            .with_lambda(LambdaSchedule::Constant(1.0))
            .with_max_iter(REFERENCE_MAX_ITER)
            .with_fpr_tol(tol)
            .with_record_every(REFERENCE_MAX_ITER);
        let trace = run(p, &cfg)?;
        let last = trace.final_record();
        if !trace.converged {
            return Err(FdrsError::NoConvergence {
                iterations: trace.iterations,
                residual: last.fpr_sq.sqrt(),
            });
        }
        Self::from_fixed_point(p, last.tz(gamma), gamma, true)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CertificateEntry {
    pub name: String,
    /// Short description of the inequality being checked.
    pub anchor: String,
    /// Largest normalized violation; negative means satisfied with room.
    pub worst_violation: f64,
    /// First failing iteration, or the tightest one when the check passes.
    pub at_iteration: usize,
    pub pass: bool,
    #[serde(skip)]
    pub diagnostics: Vec<(String, f64)>,
}

#[derive(Clone, Debug, Serialize)]
pub struct SkippedCertificate {
    pub name: String,
    pub reason: String,
}

#[derive(Clone, Debug)]
pub struct RateReport {
    pub tau_cert: f64,
    pub entries: Vec<CertificateEntry>,
    pub skipped: Vec<SkippedCertificate>,
}

impl RateReport {
    pub fn all_pass(&self) -> bool {
        self.entries.iter().all(|e| e.pass)
    }

    pub fn entry(&self, name: &str) -> Option<&CertificateEntry> {
        self.entries.iter().find(|e| e.name == name)
    }

    /// JSON array of `{name, anchor, worst_violation, at_iteration, pass}`.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.entries).expect("entries always serialize")
    }
}

/// Optional inputs for checks that need extra constants.
#[derive(Clone, Copy, Debug, Default)]
pub struct CertifyOptions {
    /// Lipschitz constant of `f` on the ball `B(x*, D)`.
    pub lipschitz: Option<f64>,
    /// Young-inequality parameter `c > 1/2` for the linear rate.
    pub linear_c: Option<f64>,
}

fn violation(lhs: f64, rhs: f64, floor: f64) -> f64 {
    if lhs.is_nan() || rhs.is_nan() || lhs == f64::INFINITY || rhs == f64::NEG_INFINITY {
        return f64::INFINITY;
    }
    if rhs == f64::INFINITY || lhs == f64::NEG_INFINITY {
        return -1.0;
    }
    (lhs - rhs) / (rhs.abs() + floor)
}

struct Tracker {
    name: &'static str,
    anchor: &'static str,
    tau: f64,
    worst: f64,
    tight_at: usize,
    first_fail: Option<usize>,
    diagnostics: Vec<(String, f64)>,
}

impl Tracker {
    fn new(name: &'static str, anchor: &'static str, tau: f64) -> Self {
        Self {
            name,
            anchor,
            tau,
            worst: f64::NEG_INFINITY,
            tight_at: 0,
            first_fail: None,
            diagnostics: Vec::new(),
        }
    }

    fn observe(&mut self, k: usize, lhs: f64, rhs: f64, floor: f64) {
        let v = violation(lhs, rhs, floor);
        if v > self.worst {
            self.worst = v;
            self.tight_at = k;
        }
        if v > self.tau && self.first_fail.is_none() {
            self.first_fail = Some(k);
        }
    }

    fn finish(self) -> CertificateEntry {
        CertificateEntry {
            name: self.name.into(),
            anchor: self.anchor.into(),
            worst_violation: self.worst,
            at_iteration: self.first_fail.unwrap_or(self.tight_at),
            pass: self.worst <= self.tau,
            diagnostics: self.diagnostics,
        }
    }
}

/// Constants shared by every check.
struct Ctx<'a> {
    p: &'a SplitProblem,
    t: &'a IterationTrace,
    r: &'a ReferenceSolution,
    d: f64,
    tau: f64,
    gamma: f64,
    alpha: f64,
    eps: f64,
    beta_v: f64,
    lin: f64,
    sq: f64,
    obj: f64,
    grad_sq: f64,
    tau_lower: f64,
    lambda_lower: f64,
}

impl<'a> Ctx<'a> {
    fn new(p: &'a SplitProblem, t: &'a IterationTrace, r: &'a ReferenceSolution) -> Result<Self> {
        if !t.is_dense() {
            return Err(FdrsError::Trace("certificates need every iterate (record_every = 1)".into()));
        }
        check_dim(p.dim(), r.z_star.len())?;
        check_dim(p.dim(), t.z0.len())?;
        if (t.gamma - r.gamma).abs() > 1e-15 * t.gamma {
            return Err(FdrsError::Trace(format!(
                "trace gamma {} differs from reference gamma {}",
                t.gamma, r.gamma
            )));
        }
        let gamma = t.gamma;
        let beta_v = p.beta_v();
        let alpha = alpha_fdrs(gamma, beta_v)?;
        let d = dist(&t.z0, &r.z_star);
        let s = 1.0 + r.z_star.norm();
        let tau = if r.numerical && d > 0.0 {
            TAU_BASE + 10.0 * r.residual / d
        } else {
            TAU_BASE
        };
        let beta = p.beta();
        let lin = 1e-6 * d + 1e-7 * s;
        let sq = 1e-6 * d * d + 1e-14 * s * s;
        let obj = 1e-6 * d * d / gamma + 1e-7 * (r.f_star.abs() + r.g_star.abs() + s * s / gamma.min(beta));
        let grad_sq = 1e-6 * d * d / (gamma * gamma) + 1e-14 * s * s / (beta * beta);
        let mut tau_lower = f64::INFINITY;
        let mut lambda_lower = f64::INFINITY;
        for rec in &t.records {
            tau_lower = tau_lower.min((1.0 - rec.lambda * alpha) * rec.lambda / alpha);
            lambda_lower = lambda_lower.min(rec.lambda);
        }
        Ok(Self {
            p,
            t,
            r,
            d,
            tau,
            gamma,
            alpha,
            eps: t.epsilon,
            beta_v,
            lin,
            sq,
            obj,
            grad_sq,
            tau_lower,
            lambda_lower,
        })
    }

    fn tracker(&self, name: &'static str, anchor: &'static str) -> Tracker {
        Tracker::new(name, anchor, self.tau)
    }

    fn records(&self) -> &'a [TraceRecord] {
        &self.t.records
    }

    fn pairs(&self) -> impl Iterator<Item = (&'a TraceRecord, &'a TraceRecord)> {
        let rs = self.records();
        rs.iter().zip(rs.iter().skip(1))
    }

    fn require_window(&self) -> Result<()> {
        let upper = epsilon_window_upper(self.alpha, self.eps);
        if let Some(r) = self.records().iter().find(|r| r.lambda > upper) {
            return Err(FdrsError::InvalidParameter(format!(
                "lambda_{} = {} exceeds the epsilon window bound {upper} (epsilon = {})",
                r.k, r.lambda, self.eps
            )));
        }
        Ok(())
    }

    fn require_tau(&self) -> Result<()> {
        if !(self.tau_lower > 0.0) {
            return Err(FdrsError::InvalidParameter("inf tau_k must be positive".into()));
        }
        Ok(())
    }

    fn require_smooth_f(&self) -> Result<()> {
        if !(self.p.beta_f() > 0.0) {
            return Err(FdrsError::NotSmooth(self.p.f().name()));
        }
        Ok(())
    }

    fn opt(&self) -> f64 {
        self.r.f_star + self.r.g_star
    }

    fn s_f(&self, rec: &TraceRecord) -> f64 {
        s_term(
            self.p.mu_f(),
            self.p.beta_f(),
            dist_sq(&rec.x_f, &self.r.x_star),
            dist_sq(&rec.subgrad_f, &self.r.subgrad_f_star),
        )
    }

    fn s_h(&self, rec: &TraceRecord) -> f64 {
        s_term(
            self.p.mu_g(),
            self.beta_v,
            dist_sq(&rec.x_h, &self.r.x_star),
            dist_sq(&rec.grad_h, &self.r.grad_h_star),
        )
    }

    /// `1 + (1 + eps) gamma / (eps^3 (2 beta_V - gamma))`.
    fn window_constant(&self) -> f64 {
        let e = self.eps;
        1.0 + (1.0 + e) * self.gamma / (e * e * e * (2.0 * self.beta_v - self.gamma))
    }

    /// Upper ergodic numerator: `(D + 4 gamma ||grad_h*|| + (1+eps) gamma D / (eps^3 (2 beta_V - gamma))) D / (2 gamma)`.
    fn ergodic_upper(&self) -> f64 {
        let e = self.eps;
        let g = self.gamma;
        (self.d
            + 4.0 * g * self.r.grad_h_star.norm()
            + (1.0 + e) * g * self.d / (e * e * e * (2.0 * self.beta_v - g)))
            * self.d
            / (2.0 * g)
    }

    /// Upper nonergodic numerator before dividing by `sqrt(tau (k+1))`.
    fn nonergodic_upper(&self) -> f64 {
        let g = self.gamma;
        (dist(&self.r.z_star, &self.r.x_star) + (1.0 + g / self.beta_v) * self.d + g * self.r.grad_h_star.norm())
            * self.d
            / g
    }

    fn ergodic_points(&self, rec: &TraceRecord) -> (Vector, Vector) {
        (
            &rec.weighted_sum_xh / rec.lambda_sum,
            &rec.weighted_sum_xf / rec.lambda_sum,
        )
    }
}

/// Feeds `(k+1) min_{j<=k} value_j` at the end against `LITTLE_O_RATIO` times
/// its value at `LITTLE_O_EARLY`. A failing entry points at the best iterate.
fn little_o(tr: &mut Tracker, series: &[(usize, f64)], floor: f64) -> Result<()> {
    let Some(&(last_k, _)) = series.last() else {
        return Err(FdrsError::Trace("empty trace".into()));
    };
    if last_k <= LITTLE_O_EARLY {
        return Err(FdrsError::InvalidParameter(format!(
            "little-o check needs iterations beyond k = {LITTLE_O_EARLY}"
        )));
    }
    for &(k, v) in series {
        if !v.is_finite() {
            tr.observe(k, f64::NAN, 0.0, floor);
        }
    }
    let mut running = f64::INFINITY;
    let mut arg = 0;
    let mut early = f64::NAN;
    for &(k, v) in series {
        if v < running {
            running = v;
            arg = k;
        }
        if k == LITTLE_O_EARLY {
            early = (k + 1) as f64 * running;
        }
    }
    let tail = (last_k + 1) as f64 * running;
    tr.diagnostics.push(("early".into(), early));
    tr.diagnostics.push(("tail".into(), tail));
    tr.observe(arg, tail, LITTLE_O_RATIO * early, floor);
    Ok(())
}

pub fn check_fejer(p: &SplitProblem, t: &IterationTrace, r: &ReferenceSolution) -> Result<CertificateEntry> {
    let c = Ctx::new(p, t, r)?;
    let mut tr = c.tracker("fejer", "distance to z* is nonincreasing");
    for (a, b) in c.pairs() {
        tr.observe(b.k, dist_sq(&b.z, &r.z_star), dist_sq(&a.z, &r.z_star), c.sq);
    }
    Ok(tr.finish())
}

pub fn check_fpr_summability(p: &SplitProblem, t: &IterationTrace, r: &ReferenceSolution) -> Result<CertificateEntry> {
    let c = Ctx::new(p, t, r)?;
    let mut tr = c.tracker("fpr_summability", "weighted sum of squared steps is at most D^2");
    let bound = c.d * c.d;
    let mut sum = 0.0;
    for (n, (a, b)) in c.pairs().enumerate() {
        let w = (1.0 - a.lambda * c.alpha) / (a.lambda * c.alpha);
        sum += w * dist_sq(&b.z, &a.z);
        tr.observe(b.k, sum, bound, c.sq * (n + 1) as f64);
    }
    let ratio = if bound > 0.0 { sum / bound } else { 0.0 };
    tr.diagnostics.push(("tightness_ratio".into(), ratio));
    Ok(tr.finish())
}

pub fn check_fpr_envelope(p: &SplitProblem, t: &IterationTrace, r: &ReferenceSolution) -> Result<CertificateEntry> {
    let c = Ctx::new(p, t, r)?;
    c.require_tau()?;
    let mut tr = c.tracker("fpr_envelope", "squared FPR at most D^2 / (tau (k+1))");
    for rec in c.records() {
        tr.observe(rec.k, rec.fpr_sq, c.d * c.d / (c.tau_lower * (rec.k + 1) as f64), c.sq);
    }
    Ok(tr.finish())
}

pub fn check_fpr_little_o(p: &SplitProblem, t: &IterationTrace, r: &ReferenceSolution) -> Result<CertificateEntry> {
    let c = Ctx::new(p, t, r)?;
    let mut tr = c.tracker("fpr_little_o", "(k+1) min FPR decays below 1% of its k=10 value");
    let series: Vec<(usize, f64)> = c.records().iter().map(|r| (r.k, r.fpr_sq)).collect();
    little_o(&mut tr, &series, c.sq)?;
    Ok(tr.finish())
}

pub fn check_gradient_sum(p: &SplitProblem, t: &IterationTrace, r: &ReferenceSolution) -> Result<CertificateEntry> {
    let c = Ctx::new(p, t, r)?;
    c.require_window()?;
    let mut tr = c.tracker("gradient_sum", "lambda-weighted squared gradient differences are summable");
    let bound = (1.0 + c.eps) / (c.gamma * c.eps * (2.0 * c.beta_v - c.gamma)) * c.d * c.d;
    let mut sum = 0.0;
    for rec in c.records() {
        sum += rec.lambda * dist_sq(&rec.grad_h, &r.grad_h_star);
        tr.observe(rec.k, sum, bound, c.grad_sq * (rec.k + 1) as f64);
    }
    Ok(tr.finish())
}

pub fn check_ergodic_objective(p: &SplitProblem, t: &IterationTrace, r: &ReferenceSolution) -> Result<CertificateEntry> {
    let c = Ctx::new(p, t, r)?;
    c.require_window()?;
    let mut tr = c.tracker("ergodic_objective", "ergodic objective error and feasibility are O(1/Lambda_k)");
    let upper = c.ergodic_upper();
    let lower = 2.0 * c.d * r.subgrad_f_star.norm();
    for rec in c.records() {
        let (xh, xf) = c.ergodic_points(rec);
        let e = p.f().eval(&xf)? + p.h(&xh)? - c.opt();
        let lam = rec.lambda_sum;
        tr.observe(rec.k, -e, lower / lam, c.obj);
        tr.observe(rec.k, e, upper / lam, c.obj);
        tr.observe(rec.k, dist(&xf, &xh), 2.0 * c.d / lam, c.lin);
    }
    Ok(tr.finish())
}

pub fn check_nonergodic_objective(p: &SplitProblem, t: &IterationTrace, r: &ReferenceSolution) -> Result<CertificateEntry> {
    let c = Ctx::new(p, t, r)?;
    c.require_tau()?;
    let mut tr = c.tracker("nonergodic_objective", "objective error and feasibility are O(1/sqrt(k+1))");
    let upper = c.nonergodic_upper();
    let lower = c.d * r.subgrad_f_star.norm();
    for rec in c.records() {
        let root = (c.tau_lower * (rec.k + 1) as f64).sqrt();
        let e = rec.objective_split - c.opt();
        tr.observe(rec.k, -e, lower / root, c.obj);
        tr.observe(rec.k, e, upper / root, c.obj);
        tr.observe(rec.k, dist(&rec.x_f, &rec.x_h), c.d / root, c.lin);
    }
    Ok(tr.finish())
}

/// Objective at `x_h` and at the ergodic `x_h` when `f` is `L`-Lipschitz on `B(x*, D)`.
pub fn check_lipschitz_objective(
    p: &SplitProblem,
    t: &IterationTrace,
    r: &ReferenceSolution,
    lipschitz: f64,
) -> Result<CertificateEntry> {
    if !(lipschitz >= 0.0 && lipschitz.is_finite()) {
        return Err(FdrsError::InvalidParameter(format!("L = {lipschitz} must be finite and >= 0")));
    }
    let c = Ctx::new(p, t, r)?;
    c.require_tau()?;
    c.require_window()?;
    let mut tr = c.tracker("lipschitz_objective", "objective error at x_h with Lipschitz f");
    let ne = c.nonergodic_upper();
    let erg = c.ergodic_upper();
    for rec in c.records() {
        let root = (c.tau_lower * (rec.k + 1) as f64).sqrt();
        let e = rec.objective_at_xh - c.opt();
        tr.observe(rec.k, -e, 0.0, c.obj);
        tr.observe(rec.k, e, ne / root + lipschitz * c.d / root, c.obj);
        let (xh, _) = c.ergodic_points(rec);
        let eb = p.f().eval(&xh)? + p.h(&xh)? - c.opt();
        let lam = rec.lambda_sum;
        tr.observe(rec.k, -eb, 0.0, c.obj);
        tr.observe(rec.k, eb, erg / lam + 2.0 * lipschitz * c.d / lam, c.obj);
    }
    Ok(tr.finish())
}

/// Best-iterate, ergodic and nonergodic bounds on `S_f + S_h`, plus the
/// little-o tail of the best iterate.
pub fn check_strong_convexity(
    p: &SplitProblem,
    t: &IterationTrace,
    r: &ReferenceSolution,
) -> Result<Vec<CertificateEntry>> {
    let c = Ctx::new(p, t, r)?;
    c.require_window()?;
    c.require_tau()?;
    let numerator = c.window_constant() * c.d * c.d / (4.0 * c.gamma);
    let mut best = c.tracker("strong_convexity_best", "min S_f + S_h is O(1/(k+1))");
    let mut erg = c.tracker("strong_convexity_ergodic", "strong convexity terms at ergodic points are O(1/Lambda_k)");
    let mut ne = c.tracker("strong_convexity_nonergodic", "S_f + S_h is O(1/sqrt(k+1))");
    let mut lo = c.tracker("strong_convexity_little_o", "(k+1) min(S_f + S_h) decays below 1% of its k=10 value");
    let ne_num = (1.0 + c.gamma / c.beta_v) * c.d * c.d / (2.0 * c.gamma);
    let mut running = f64::INFINITY;
    let mut series = Vec::with_capacity(c.records().len());
    for rec in c.records() {
        let s = c.s_f(rec) + c.s_h(rec);
        series.push((rec.k, s));
        running = running.min(s);
        let cur = if s.is_finite() { running } else { s };
        let k1 = (rec.k + 1) as f64;
        best.observe(rec.k, cur, numerator / (c.lambda_lower * k1), c.obj);
        let (xh, xf) = c.ergodic_points(rec);
        let lhs = 0.5 * p.mu_f() * dist_sq(&xf, &r.x_star) + 0.5 * p.mu_g() * dist_sq(&xh, &r.x_star);
        erg.observe(rec.k, lhs, numerator / rec.lambda_sum, c.obj);
        ne.observe(rec.k, s, ne_num / (c.tau_lower * k1).sqrt(), c.obj);
    }
    let mut out = vec![best.finish(), erg.finish(), ne.finish()];
    if little_o(&mut lo, &series, c.obj).is_ok() {
        out.push(lo.finish());
    }
    Ok(out)
}

/// Coefficient of `||z - z+||^2` in the smooth-`f` fundamental inequality
/// when `gamma <= beta_f`: `1 + (gamma - beta_f) / (beta_f lambda)`.
fn smooth_small_step_coeff(gamma: f64, beta_f: f64, lambda: f64) -> f64 {
    1.0 + gamma / (beta_f * lambda) - 1.0 / lambda
}

/// `1 + (gamma - beta_f) / (2 beta_f)` for the `gamma > beta_f` case.
fn smooth_large_step_factor(gamma: f64, beta_f: f64) -> f64 {
    0.5 + gamma / (2.0 * beta_f)
}

/// Nonnegativity, little-o tail and summability of the objective error at `x_h`
/// for smooth `f`.
pub fn check_best_iterate_smooth(
    p: &SplitProblem,
    t: &IterationTrace,
    r: &ReferenceSolution,
) -> Result<Vec<CertificateEntry>> {
    let c = Ctx::new(p, t, r)?;
    c.require_smooth_f()?;
    c.require_window()?;
    c.require_tau()?;
    let beta_f = p.beta_f();
    let mut nonneg = c.tracker("smooth_nonnegativity", "objective error at x_h is nonnegative");
    let mut lo = c.tracker("smooth_little_o", "(k+1) min objective error at x_h decays below 1% of its k=10 value");
    let mut sum_tr = c.tracker("smooth_summability", "objective errors at x_h are summable");
    let delta = c
        .records()
        .iter()
        .map(|r| (1.0 - r.lambda * c.alpha) / (r.lambda * c.alpha))
        .fold(f64::INFINITY, f64::min);
    let ll = c.lambda_lower;
    let factor = if c.gamma <= beta_f { 1.0 } else { smooth_large_step_factor(c.gamma, beta_f) };
    let bound = (1.0
        + 1.0 / delta
        + (1.0 + c.eps) * c.gamma / (c.eps * (2.0 * c.beta_v - c.gamma))
        + 1.0 / (ll * delta))
        * c.d
        * c.d
        / (2.0 * c.gamma * ll)
        * factor;
    sum_tr.diagnostics.push(("bound".into(), bound));
    let mut sum = 0.0;
    let mut series = Vec::with_capacity(c.records().len());
    for rec in c.records() {
        let e = rec.objective_at_xh - c.opt();
        series.push((rec.k, e));
        nonneg.observe(rec.k, -e, 0.0, c.obj);
        sum += e;
        sum_tr.observe(rec.k, sum, bound, c.obj * (rec.k + 1) as f64);
    }
    let mut out = vec![nonneg.finish()];
    if little_o(&mut lo, &series, c.obj).is_ok() {
        out.push(lo.finish());
    }
    out.push(sum_tr.finish());
    Ok(out)
}

/// `(C1(lambda), C2(lambda))` of the linear rate under strong convexity and smooth `f`.
pub fn linear_contraction_factors(
    gamma: f64,
    lambda: f64,
    c: f64,
    mu_f: f64,
    mu_g: f64,
    beta_f: f64,
    beta_v: f64,
) -> Result<(f64, f64)> {
    if !(c > 0.5) {
        return Err(FdrsError::InvalidParameter(format!("c = {c} must exceed 1/2")));
    }
    if !(gamma > 0.0 && gamma < beta_v / c) {
        return Err(FdrsError::InvalidParameter(format!(
            "gamma = {gamma} outside (0, beta_V / c) = (0, {})",
            beta_v / c
        )));
    }
    let lam_max = (2.0 * c - 1.0) / c;
    if !(lambda > 0.0 && lambda < lam_max) {
        return Err(FdrsError::InvalidParameter(format!(
            "lambda = {lambda} outside (0, (2c - 1)/c) = (0, {lam_max})"
        )));
    }
    if mu_f < 0.0 || mu_g < 0.0 || beta_f < 0.0 {
        return Err(FdrsError::InvalidParameter("moduli must be nonnegative".into()));
    }
    let gap = lam_max - lambda;
    let m1 = (gamma * mu_g / (1.0 + gamma / beta_v).powi(2))
        .min(beta_f / gamma)
        .min(gap);
    // mu_f gamma / (1 + gamma/beta_f)^2, which is 0 when beta_f = 0
    let t1 = if beta_f > 0.0 { gamma * mu_f / (1.0 + gamma / beta_f).powi(2) } else { 0.0 };
    let m2 = t1.min((beta_v - c * gamma) / gamma).min(0.25 * gap);
    Ok(((1.0 - lambda / 3.0 * m1).sqrt(), (1.0 - lambda / 3.0 * m2).sqrt()))
}

/// Per-step contraction by the smaller applicable factor, and the unrolled product.
pub fn check_linear_convergence(
    p: &SplitProblem,
    t: &IterationTrace,
    r: &ReferenceSolution,
    c_param: f64,
) -> Result<CertificateEntry> {
    let c = Ctx::new(p, t, r)?;
    let beta_f = p.beta_f();
    let use1 = p.mu_g() * beta_f > 0.0;
    let use2 = p.mu_f() * beta_f > 0.0;
    if !(use1 || use2) {
        return Err(FdrsError::InvalidParameter("needs beta_f (mu_f + mu_g) > 0".into()));
    }
    let mut factors = Vec::with_capacity(c.records().len());
    for rec in c.records() {
        let (c1, c2) = linear_contraction_factors(c.gamma, rec.lambda, c_param, p.mu_f(), p.mu_g(), beta_f, c.beta_v)?;
        let f = match (use1, use2) {
            (true, true) => c1.min(c2),
            (true, false) => c1,
            _ => c2,
        };
        factors.push(f);
    }
    let mut tr = c.tracker("linear_convergence", "distance to z* contracts by C(lambda_k) each step");
    let mut product = 1.0;
    for ((a, b), f) in c.pairs().zip(factors.iter()) {
        let da = dist(&a.z, &r.z_star);
        let db = dist(&b.z, &r.z_star);
        tr.observe(b.k, db, f * da, c.lin);
        product *= f;
        tr.observe(b.k, db, product * c.d, c.lin);
    }
    tr.diagnostics.push(("max_factor".into(), factors.iter().cloned().fold(0.0, f64::max)));
    Ok(tr.finish())
}

/// Upper fundamental inequality at `x = x*` for every consecutive pair.
pub fn check_fundamental_upper(p: &SplitProblem, t: &IterationTrace, r: &ReferenceSolution) -> Result<CertificateEntry> {
    let c = Ctx::new(p, t, r)?;
    let mut tr = c.tracker("fundamental_upper", "upper fundamental inequality at x = x*");
    let g = c.gamma;
    for (a, b) in c.pairs() {
        let lam = a.lambda;
        let lhs = 2.0 * g * lam * (a.objective_split - c.opt() + c.s_f(a) + c.s_h(a));
        let step = &a.z - &b.z;
        let rhs = dist_sq(&a.z, &r.x_star) - dist_sq(&b.z, &r.x_star)
            + (1.0 - 2.0 / lam) * step.norm_squared()
            + 2.0 * g * a.grad_h.dot(&step);
        tr.observe(b.k, lhs, rhs, c.sq + 2.0 * g * lam * c.obj);
    }
    Ok(tr.finish())
}

/// Lower fundamental inequality at every recorded `(x_f, x_h)`.
pub fn check_fundamental_lower(p: &SplitProblem, t: &IterationTrace, r: &ReferenceSolution) -> Result<CertificateEntry> {
    let c = Ctx::new(p, t, r)?;
    let mut tr = c.tracker("fundamental_lower", "lower fundamental inequality");
    for rec in c.records() {
        let lhs = (&rec.x_f - &rec.x_h).dot(&r.subgrad_f_star) + c.s_f(rec) + c.s_h(rec);
        tr.observe(rec.k, lhs, rec.objective_split - c.opt(), c.obj);
    }
    Ok(tr.finish())
}

/// The strong-convexity form of the fundamental inequality.
pub fn check_fundamental_strong(p: &SplitProblem, t: &IterationTrace, r: &ReferenceSolution) -> Result<CertificateEntry> {
    let c = Ctx::new(p, t, r)?;
    let mut tr = c.tracker("fundamental_strong", "4 gamma lambda (S_f + S_h) bounded by the step telescoping terms");
    let g = c.gamma;
    for (a, b) in c.pairs() {
        let lam = a.lambda;
        let lhs = 4.0 * g * lam * (c.s_f(a) + c.s_h(a));
        let step = &a.z - &b.z;
        let rhs = dist_sq(&a.z, &r.z_star) - dist_sq(&b.z, &r.z_star)
            + (1.0 - 2.0 / lam) * step.norm_squared()
            + 2.0 * g * (&a.grad_h - &r.grad_h_star).dot(&step);
        tr.observe(b.k, lhs, rhs, c.sq + 4.0 * g * lam * c.obj);
    }
    Ok(tr.finish())
}

/// The fundamental inequality for smooth `f`, with its `gamma <= beta_f` case split.
pub fn check_fundamental_smooth(p: &SplitProblem, t: &IterationTrace, r: &ReferenceSolution) -> Result<CertificateEntry> {
    let c = Ctx::new(p, t, r)?;
    c.require_smooth_f()?;
    let beta_f = p.beta_f();
    let mut tr = c.tracker("fundamental_smooth", "objective error at x_h bounded by the step telescoping terms");
    let g = c.gamma;
    for (a, b) in c.pairs() {
        let lam = a.lambda;
        let lhs = 2.0 * g * lam * (a.objective_at_xh - c.opt());
        let step = &a.z - &b.z;
        let tele = dist_sq(&a.z, &r.z_star) - dist_sq(&b.z, &r.z_star);
        let inner = 2.0 * g * (&a.grad_h - &r.grad_h_star).dot(&step);
        let (rhs, m) = if g <= beta_f {
            (tele + smooth_small_step_coeff(g, beta_f, lam) * step.norm_squared() + inner, 1.0)
        } else {
            let m = smooth_large_step_factor(g, beta_f);
            (m * (tele + step.norm_squared()) + m * inner, m)
        };
        tr.observe(b.k, lhs, rhs, m * c.sq + 2.0 * g * lam * c.obj);
    }
    Ok(tr.finish())
}

/// Runs every applicable check. Checks whose hypotheses fail are listed in
/// `skipped` with the reason; trace or dimension problems are errors.
pub fn certify_all(
    p: &SplitProblem,
    t: &IterationTrace,
    r: &ReferenceSolution,
    opts: CertifyOptions,
) -> Result<RateReport> {
    let ctx = Ctx::new(p, t, r)?;
    let mut entries = Vec::new();
    let mut skipped = Vec::new();
    let mut take = |name: &str, res: Result<Vec<CertificateEntry>>| -> Result<()> {
        match res {
            Ok(es) => entries.extend(es),
            Err(e @ (FdrsError::InvalidParameter(_) | FdrsError::NotSmooth(_))) => skipped.push(SkippedCertificate {
                name: name.into(),
                reason: e.to_string(),
            }),
            Err(e) => return Err(e),
        }
        Ok(())
    };
    take("fejer", check_fejer(p, t, r).map(|e| vec![e]))?;
    take("fpr_summability", check_fpr_summability(p, t, r).map(|e| vec![e]))?;
    take("fpr_envelope", check_fpr_envelope(p, t, r).map(|e| vec![e]))?;
    take("fpr_little_o", check_fpr_little_o(p, t, r).map(|e| vec![e]))?;
    take("gradient_sum", check_gradient_sum(p, t, r).map(|e| vec![e]))?;
    take("ergodic_objective", check_ergodic_objective(p, t, r).map(|e| vec![e]))?;
    take("nonergodic_objective", check_nonergodic_objective(p, t, r).map(|e| vec![e]))?;
    match opts.lipschitz {
        Some(l) => take("lipschitz_objective", check_lipschitz_objective(p, t, r, l).map(|e| vec![e]))?,
        None => take(
            "lipschitz_objective",
            Err(FdrsError::InvalidParameter("no Lipschitz constant supplied".into())),
        )?,
    }
    take("strong_convexity", check_strong_convexity(p, t, r))?;
    take("best_iterate_smooth", check_best_iterate_smooth(p, t, r))?;
    match opts.linear_c {
        Some(cp) => take("linear_convergence", check_linear_convergence(p, t, r, cp).map(|e| vec![e]))?,
        None => take(
            "linear_convergence",
            Err(FdrsError::InvalidParameter("no contraction parameter c supplied".into())),
        )?,
    }
    take("fundamental_upper", check_fundamental_upper(p, t, r).map(|e| vec![e]))?;
    take("fundamental_lower", check_fundamental_lower(p, t, r).map(|e| vec![e]))?;
    take("fundamental_strong", check_fundamental_strong(p, t, r).map(|e| vec![e]))?;
    take("fundamental_smooth", check_fundamental_smooth(p, t, r).map(|e| vec![e]))?;
    Ok(RateReport { tau_cert: ctx.tau, entries, skipped })
}
