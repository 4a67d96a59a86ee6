//! The relaxed FDRS iteration with validated parameters and trace recording.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, FdrsError, Result};
use crate::linalg::{dist_sq, Vector};
use crate::operators::{alpha_fdrs, apply_fdrs, relax, SplitProblem};

pub const DEFAULT_EPSILON: f64 = 0.1;
pub const DEFAULT_FPR_TOL: f64 = 1e-20;
pub const DIVERGENCE_FACTOR: f64 = 1e12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum LambdaSchedule {
    Constant(f64),
    /// Explicit values; the last one repeats past the end.
    Sequence(Vec<f64>),
    /// Constant `lambda` that must also satisfy the epsilon window.
    EpsilonWindow(f64),
}

impl LambdaSchedule {
    pub fn lambda(&self, k: usize) -> f64 {
        match self {
            LambdaSchedule::Constant(l) | LambdaSchedule::EpsilonWindow(l) => *l,
            LambdaSchedule::Sequence(ls) => ls[k.min(ls.len() - 1)],
        }
    }

    fn values(&self) -> Vec<f64> {
        match self {
            LambdaSchedule::Constant(l) | LambdaSchedule::EpsilonWindow(l) => vec![*l],
            LambdaSchedule::Sequence(ls) => ls.clone(),
        }
    }
}

/// Largest relaxation allowed by the epsilon window.
pub fn epsilon_window_upper(alpha: f64, epsilon: f64) -> f64 {
    (1.0 - epsilon) * (1.0 + epsilon * alpha) / alpha
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum GammaMode {
    Conservative,
    Aggressive,
}

/// `beta_V` (conservative) or `1.99 beta_V` (aggressive).
pub fn default_gamma(p: &SplitProblem, mode: GammaMode) -> f64 {
    match mode {
        GammaMode::Conservative => p.beta_v(),
        GammaMode::Aggressive => 1.99 * p.beta_v(),
    }
}

#[derive(Clone, Debug)]
pub struct SolveConfig {
    pub gamma: f64,
    pub lambda_schedule: LambdaSchedule,
    pub epsilon: f64,
    pub max_iter: usize,
    /// Stop once `||Tz - z||^2 <= fpr_tol`.
    pub fpr_tol: f64,
    pub record_every: usize,
    pub z0: Vector,
}

impl SolveConfig {
    pub fn new(gamma: f64, z0: Vector) -> Self {
        Self {
            gamma,
            lambda_schedule: LambdaSchedule::Constant(1.0),
            epsilon: DEFAULT_EPSILON,
            max_iter: 1000,
            fpr_tol: DEFAULT_FPR_TOL,
            record_every: 1,
            z0,
        }
    }

    pub fn with_lambda(mut self, schedule: LambdaSchedule) -> Self {
        self.lambda_schedule = schedule;
        self
    }

    pub fn with_max_iter(mut self, max_iter: usize) -> Self {
        self.max_iter = max_iter;
        self
    }

    pub fn with_fpr_tol(mut self, fpr_tol: f64) -> Self {
        self.fpr_tol = fpr_tol;
        self
    }

    pub fn with_record_every(mut self, stride: usize) -> Self {
        self.record_every = stride;
        self
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        self
    }

    /// Checks the step size and relaxation windows; returns `alpha_FDRS`.
    pub fn validate(&self, p: &SplitProblem) -> Result<f64> {
        check_dim(p.dim(), self.z0.len())?;
        let alpha = alpha_fdrs(self.gamma, p.beta_v())?;
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(FdrsError::InvalidParameter(format!(
                "epsilon = {} outside (0, 1)",
                self.epsilon
            )));
        }
        if self.record_every == 0 {
            return Err(FdrsError::InvalidParameter("record_every must be >= 1".into()));
        }
        if matches!(&self.lambda_schedule, LambdaSchedule::Sequence(ls) if ls.is_empty()) {
            return Err(FdrsError::InvalidParameter("empty lambda sequence".into()));
        }
        let upper = 1.0 / alpha;
        let window = epsilon_window_upper(alpha, self.epsilon);
        for l in self.lambda_schedule.values() {
            if !(l > 0.0 && l < upper) {
                return Err(FdrsError::InvalidParameter(format!(
                    "lambda = {l} outside (0, 1/alpha) = (0, {upper})"
                )));
            }
            if matches!(self.lambda_schedule, LambdaSchedule::EpsilonWindow(_)) && l > window {
                return Err(FdrsError::InvalidParameter(format!(
                    "lambda = {l} exceeds the epsilon window bound {window}"
                )));
            }
        }
        if self.z0.iter().any(|v| !v.is_finite()) {
            return Err(FdrsError::InvalidParameter("z0 is not finite".into()));
        }
        Ok(alpha)
    }
}

/// Everything known about iterate `k`.
#[derive(Clone, Debug)]
pub struct TraceRecord {
    pub k: usize,
    pub z: Vector,
    pub x_h: Vector,
    pub x_f: Vector,
    pub fpr_sq: f64,
    pub objective_at_xh: f64,
    pub objective_split: f64,
    pub feasibility: f64,
    pub grad_h: Vector,
    pub subgrad_chi: Vector,
    pub subgrad_f: Vector,
    pub lambda: f64,
    /// `Lambda_k = sum_{i <= k} lambda_i`.
    pub lambda_sum: f64,
    pub weighted_sum_xh: Vector,
    pub weighted_sum_xf: Vector,
}

impl TraceRecord {
    /// `T z^k = x_f + gamma * subgrad_chi`.
    pub fn tz(&self, gamma: f64) -> Vector {
        &self.x_f + &self.subgrad_chi * gamma
    }

    /// `z^{k+1} = z^k + lambda_k (x_f - x_h)`.
    pub fn z_next(&self) -> Vector {
        &self.z + (&self.x_f - &self.x_h) * self.lambda
    }

    /// `||Tz - z|| / (1 + ||Tz||)`.
    pub fn normalized_fpr(&self, gamma: f64) -> f64 {
        self.fpr_sq.sqrt() / (1.0 + self.tz(gamma).norm())
    }
}

#[derive(Clone, Debug)]
pub struct IterationTrace {
    pub records: Vec<TraceRecord>,
    pub gamma: f64,
    pub alpha: f64,
    pub epsilon: f64,
    pub schedule: LambdaSchedule,
    pub record_every: usize,
    pub z0: Vector,
    /// Number of updates performed.
    pub iterations: usize,
    pub converged: bool,
}

impl IterationTrace {
    pub fn final_record(&self) -> &TraceRecord {
        self.records.last().expect("a trace always holds k = 0")
    }

    pub fn record(&self, k: usize) -> Option<&TraceRecord> {
        self.records
            .binary_search_by_key(&k, |r| r.k)
            .ok()
            .map(|i| &self.records[i])
    }

    /// True when every iterate `0..=iterations` is recorded.
    pub fn is_dense(&self) -> bool {
        self.records.iter().enumerate().all(|(i, r)| r.k == i)
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "k,fpr_sq,objective_at_xh,objective_split,feasibility,lambda")?;
        for r in &self.records {
            writeln!(
                out,
                "{},{:?},{:?},{:?},{:?},{:?}",
                r.k, r.fpr_sq, r.objective_at_xh, r.objective_split, r.feasibility, r.lambda
            )?;
        }
        Ok(())
    }
}

/// Runs `z^{k+1} = (1 - lambda_k) z^k + lambda_k T z^k`.
pub fn run(p: &SplitProblem, cfg: &SolveConfig) -> Result<IterationTrace> {
    let alpha = cfg.validate(p)?;
    let d = p.dim();
    let guard = DIVERGENCE_FACTOR * (1.0 + cfg.z0.norm());
    let mut z = cfg.z0.clone();
    let mut records = Vec::new();
    let mut lambda_sum = 0.0;
    let mut sum_xh = Vector::zeros(d);
    let mut sum_xf = Vector::zeros(d);
    let mut converged;
    let mut k = 0;
    loop {
        let step = apply_fdrs(p, &z, cfg.gamma)?;
        let lambda = cfg.lambda_schedule.lambda(k);
        lambda_sum += lambda;
        sum_xh.axpy(lambda, &step.x_h, 1.0);
        sum_xf.axpy(lambda, &step.x_f, 1.0);
        let fpr_sq = dist_sq(&step.x_f, &step.x_h);
        converged = fpr_sq <= cfg.fpr_tol;
        let last = converged || k == cfg.max_iter;
        if k % cfg.record_every == 0 || last {
            let g_xh = p.g().eval(&step.x_h)?;
            records.push(TraceRecord {
                k,
                z: z.clone(),
                fpr_sq,
                objective_at_xh: p.f().eval(&step.x_h)? + g_xh,
                objective_split: p.f().eval(&step.x_f)? + g_xh,
                feasibility: fpr_sq.sqrt(),
                lambda,
                lambda_sum,
                weighted_sum_xh: sum_xh.clone(),
                weighted_sum_xf: sum_xf.clone(),
                x_h: step.x_h,
                x_f: step.x_f,
                grad_h: step.grad_h,
                subgrad_chi: step.subgrad_chi,
                subgrad_f: step.subgrad_f,
            });
            if last {
                break;
            }
        }
        z = relax(&z, &step.z_next, lambda);
        k += 1;
        let norm = z.norm();
        if !norm.is_finite() || norm > guard {
            return Err(FdrsError::Diverged { k, norm });
        }
    }
    Ok(IterationTrace {
        records,
        gamma: cfg.gamma,
        alpha,
        epsilon: cfg.epsilon,
        schedule: cfg.lambda_schedule.clone(),
        record_every: cfg.record_every,
        z0: cfg.z0.clone(),
        iterations: k,
        converged,
    })
}

/// Ergodic iterates `(x_h_bar^k, x_f_bar^k)` at a recorded `k`.
pub fn ergodic_averages(trace: &IterationTrace, k: usize) -> Result<(Vector, Vector)> {
    let r = trace
        .record(k)
        .ok_or_else(|| FdrsError::Trace(format!("iteration {k} is not recorded")))?;
    Ok((
        &r.weighted_sum_xh / r.lambda_sum,
        &r.weighted_sum_xf / r.lambda_sum,
    ))
}
