//! The primal-dual recursion that FDRS reduces to when `lambda = 1` and the
//! dual step is `1/gamma`.
//!
//! With `y^k = -P_{V-perp} z^k / gamma` the two methods generate the same
//! `x_f` sequence. The comparison here starts the recursion from the first
//! FDRS step, `x_f^0 = prox(...)` at `z^0` and `y^0 = -P_{V-perp} z^0 / gamma`,
//! so state `k` lines up with trace record `k`. Equivalently `z^{k+1} =
//! x_f^k - gamma y^k`.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{check_dim, FdrsError, Result};
use crate::linalg::Vector;
use crate::operators::SplitProblem;
use crate::solver::{run, IterationTrace, LambdaSchedule, SolveConfig};

/// Tolerance on `||P_V y||` after each update.
pub const DUAL_FEASIBILITY_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct PdState {
    /// Dual variable, kept in `V-perp`.
    pub y: Vector,
    pub x_f: Vector,
}

/// `iters` updates from `(y0, xf0)`; returns `iters + 1` states.
pub fn run_pd(p: &SplitProblem, gamma: f64, iters: usize, y0: &Vector, xf0: &Vector) -> Result<Vec<PdState>> {
    check_dim(p.dim(), y0.len())?;
    check_dim(p.dim(), xf0.len())?;
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(FdrsError::InvalidParameter(format!("gamma = {gamma} must be positive")));
    }
    let v = p.subspace();
    let mut states = Vec::with_capacity(iters + 1);
    let mut state = PdState { y: v.project_complement(y0)?, x_f: xf0.clone() };
    for _ in 0..iters {
        let y_next = v.project_complement(&(&state.y - &state.x_f / gamma))?;
        let arg = &state.x_f - p.grad_h(&state.x_f)? * gamma + (&y_next * 2.0 - &state.y) * gamma;
        let x_next = p.f().prox(&arg, gamma)?;
        states.push(std::mem::replace(&mut state, PdState { y: y_next, x_f: x_next }));
    }
    states.push(state);
    Ok(states)
}

/// Largest deviations between an FDRS trace and a primal-dual run.
#[derive(Clone, Debug, Serialize)]
pub struct EquivalenceReport {
    pub compared: usize,
    pub max_xf_deviation: f64,
    pub xf_deviation_at: usize,
    /// `max_k ||x_f^k||` over the FDRS trace, the scale of the primal tolerance.
    pub max_xf_norm: f64,
    /// `max_k ||y^k + subgrad_chi^k||`.
    pub max_y_deviation: f64,
    pub y_deviation_at: usize,
    /// `max_k ||P_V y^k||`.
    pub max_dual_infeasibility: f64,
    pub trace_gamma: f64,
    pub pd_gamma: f64,
    pub mapping: &'static str,
}

impl EquivalenceReport {
    pub fn within(&self, tol: f64) -> bool {
        self.max_xf_deviation <= tol * (1.0 + self.max_xf_norm) && self.max_y_deviation <= tol
    }
}

const MAPPING: &str = "x_f^0 = x_f of the first FDRS step, y^0 = -P_{V-perp} z^0 / gamma";

fn argmax(values: impl IndexedParallelIterator<Item = f64>) -> (usize, f64) {
    values
        .enumerate()
        .map(|(k, d)| (k, if d.is_nan() { f64::INFINITY } else { d }))
        .reduce(|| (0, 0.0), |a, b| if b.1 > a.1 || (b.1 == a.1 && b.0 < a.0) { b } else { a })
}

/// Compares records and states index by index. `gamma` is the step of the
/// primal-dual run; a mismatch with the trace is reported, not rejected.
pub fn equivalence_check(p: &SplitProblem, trace: &IterationTrace, states: &[PdState], gamma: f64) -> Result<EquivalenceReport> {
    if !trace.is_dense() {
        return Err(FdrsError::Trace("equivalence needs every iterate recorded".into()));
    }
    let n = trace.records.len().min(states.len());
    let recs = &trace.records[..n];
    let st = &states[..n];
    let (xf_at, max_xf) = argmax(recs.par_iter().zip(st).map(|(r, s)| (&r.x_f - &s.x_f).norm()));
    let (y_at, max_y) = argmax(recs.par_iter().zip(st).map(|(r, s)| (&s.y + &r.subgrad_chi).norm()));
    let max_xf_norm = recs.par_iter().map(|r| r.x_f.norm()).reduce(|| 0.0, f64::max);
    let v = p.subspace();
    let infeas: Vec<f64> = st.par_iter().map(|s| v.project(&s.y).map(|w| w.norm())).collect::<Result<_>>()?;
    Ok(EquivalenceReport {
        compared: n,
        max_xf_deviation: max_xf,
        xf_deviation_at: xf_at,
        max_xf_norm,
        max_y_deviation: max_y,
        y_deviation_at: y_at,
        max_dual_infeasibility: infeas.into_iter().fold(0.0, f64::max),
        trace_gamma: trace.gamma,
        pd_gamma: gamma,
        mapping: MAPPING,
    })
}

/// Runs FDRS with `lambda = 1` for `iters` steps from `z0`, starts the
/// primal-dual recursion from the first step and compares the two.
pub fn compare_with_fdrs(
    p: &SplitProblem,
    z0: &Vector,
    gamma: f64,
    iters: usize,
) -> Result<(IterationTrace, Vec<PdState>, EquivalenceReport)> {
    let cfg = SolveConfig::new(gamma, z0.clone())
        .with_lambda(LambdaSchedule::Constant(1.0))
        .with_max_iter(iters)
        .with_fpr_tol(-1.0);
    let trace = run(p, &cfg)?;
    let first = &trace.records[0];
    let states = run_pd(p, gamma, iters, &(-&first.subgrad_chi), &first.x_f)?;
    let report = equivalence_check(p, &trace, &states, gamma)?;
    Ok((trace, states, report))
}
