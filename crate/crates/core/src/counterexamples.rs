//! Rotation-subspace instances on which the iteration is provably slow.
//!
//! The space is a direct sum of `N` planes. In plane `i`, `V` is the first axis
//! and `U` the line through `(c_i, s_i)`; `f = chi_U + (a/2)||.||^2`,
//! `g = (1/2)||.||^2`, `gamma = 1` and `lambda = 1`. The operator then acts on
//! each plane as `(1/(a+1)) [[0, -s c], [0, c^2 + a]]`, so everything is
//! computed block by block without forming any `2N x 2N` matrix.

use nalgebra::{Matrix2, Vector2};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{FdrsError, Result};
use crate::functions::FunctionDescriptor;
use crate::linalg::{compensated_sum, Vector};
use crate::operators::SplitProblem;
use crate::subspace::Subspace;

/// Offset keeping slow-schedule values strictly inside `(eta, 1)`.
pub const SCHEDULE_EPS0: f64 = 1e-3;

pub fn fdrs_block_matrix(c: f64, a: f64) -> Matrix2<f64> {
    let s = (1.0 - c * c).sqrt();
    Matrix2::new(0.0, -s * c, 0.0, c * c + a) / (a + 1.0)
}

/// `b = (a + c^2)/(a + 1)`.
pub fn block_eigenvalue(c: f64, a: f64) -> f64 {
    (a + c * c) / (a + 1.0)
}

/// `(-c s / (a + c^2), 1)`, taken as `(0, 1)` when `c = 0`.
pub fn block_eigenvector(c: f64, a: f64) -> Vector2<f64> {
    if c == 0.0 {
        return Vector2::new(0.0, 1.0);
    }
    let s = (1.0 - c * c).sqrt();
    Vector2::new(-c * s / (a + c * c), 1.0)
}

#[derive(Clone, Debug)]
pub struct RotationInstance {
    cosines: Vec<f64>,
    sines: Vec<f64>,
    a: f64,
}

impl RotationInstance {
    pub fn new(cosines: Vec<f64>, a: f64) -> Result<Self> {
        if !(a >= 0.0 && a.is_finite()) {
            return Err(FdrsError::InvalidParameter(format!("a = {a} must be >= 0")));
        }
        if let Some(c) = cosines.iter().find(|c| !(**c >= 0.0 && **c < 1.0)) {
            return Err(FdrsError::InvalidParameter(format!("cosine {c} outside [0, 1)")));
        }
        let sines = cosines.iter().map(|c| (1.0 - c * c).sqrt()).collect();
        Ok(Self { cosines, sines, a })
    }

    pub fn blocks(&self) -> usize {
        self.cosines.len()
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn cosines(&self) -> &[f64] {
        &self.cosines
    }

    pub fn eigenvalue(&self, i: usize) -> f64 {
        block_eigenvalue(self.cosines[i], self.a)
    }

    pub fn eigenvector(&self, i: usize) -> Vector2<f64> {
        block_eigenvector(self.cosines[i], self.a)
    }

    /// The same instance as a general split problem, with `beta_V = 1`.
    pub fn split_problem(&self) -> Result<SplitProblem> {
        let n = self.blocks();
        let u = Subspace::block_rotation_from_cosines(&self.cosines)?;
        let f = FunctionDescriptor::subspace_plus_scaled_sq_norm(u, self.a)?;
        let g = FunctionDescriptor::shifted_scaled_sq_norm(1.0, Vector::zeros(2 * n))?;
        SplitProblem::new(f, g, Subspace::block_axis(n))?.with_beta_v(1.0)
    }

    /// `z0` whose block `i` is `scale_i * z_i / ||z_i||`.
    pub fn eigen_start(&self, scale: impl Fn(usize) -> f64) -> Vec<[f64; 2]> {
        (0..self.blocks())
            .map(|i| {
                let v = self.eigenvector(i);
                let w = v * (scale(i) / v.norm());
                [w[0], w[1]]
            })
            .collect()
    }
}

/// Squared norms of `z^k`, `x_h^k` and `x_f^k` for `k = 0..=iterations`.
#[derive(Clone, Debug, Serialize)]
pub struct BlockRun {
    pub z_norm_sq: Vec<f64>,
    pub xh_norm_sq: Vec<f64>,
    pub xf_norm_sq: Vec<f64>,
}

/// Iterates the block operator from `z0`. Per-block terms are formed in
/// parallel and summed in a fixed order, so results do not depend on the
/// number of worker threads.
pub fn run_blocks(inst: &RotationInstance, z0: &[[f64; 2]], iterations: usize) -> Result<BlockRun> {
    if z0.len() != inst.blocks() {
        return Err(FdrsError::DimensionMismatch {
            expected: inst.blocks(),
            got: z0.len(),
        });
    }
    let scale = 1.0 / (inst.a + 1.0);
    let mut z: Vec<[f64; 2]> = z0.to_vec();
    let mut terms = vec![[0.0f64; 3]; z.len()];
    let mut out = BlockRun {
        z_norm_sq: Vec::with_capacity(iterations + 1),
        xh_norm_sq: Vec::with_capacity(iterations + 1),
        xf_norm_sq: Vec::with_capacity(iterations + 1),
    };
    for k in 0..=iterations {
        z.par_iter_mut()
            .zip(terms.par_iter_mut())
            .zip(inst.cosines.par_iter().zip(inst.sines.par_iter()))
            .for_each(|((zi, ti), (&c, &s))| {
                let [z0i, z1i] = *zi;
                // x_h = (z0, 0); x_f = -z1 s (c, s)/(a+1); T z = x_f + (0, z1)
                let xf = [-z1i * s * c * scale, -z1i * s * s * scale];
                *ti = [z0i * z0i + z1i * z1i, z0i * z0i, xf[0] * xf[0] + xf[1] * xf[1]];
                if k < iterations {
                    *zi = [xf[0], xf[1] + z1i];
                }
            });
        out.z_norm_sq.push(compensated_sum(terms.iter().map(|t| t[0])));
        out.xh_norm_sq.push(compensated_sum(terms.iter().map(|t| t[1])));
        out.xf_norm_sq.push(compensated_sum(terms.iter().map(|t| t[2])));
    }
    Ok(out)
}

/// `((k+1)/(N+1))^{2 alpha}`, the share of the lower bound lost by keeping `N` blocks.
pub fn truncation_deficit(alpha: f64, k: usize, blocks: usize) -> f64 {
    ((k + 1) as f64 / (blocks + 1) as f64).powf(2.0 * alpha)
}

/// `(1 - delta) / (k+1)^{2 alpha}`.
pub fn sublinear_xh_lower(alpha: f64, k: usize, blocks: usize) -> f64 {
    (1.0 - truncation_deficit(alpha, k, blocks)) / ((k + 1) as f64).powf(2.0 * alpha)
}

/// `(1 - delta) (a + 1/2)^2 / ((a+1)^2 (k+1)^{2 alpha})`.
pub fn sublinear_xf_lower(alpha: f64, a: f64, k: usize, blocks: usize) -> f64 {
    sublinear_xh_lower(alpha, k, blocks) * (a + 0.5).powi(2) / (a + 1.0).powi(2)
}

/// `c_i = sqrt(i/(i+1))` with an eigenvector start whose block norms decay
/// like `(i+1)^{-alpha}`.
pub fn sublinear_instance(alpha: f64, a: f64, blocks: usize) -> Result<(RotationInstance, Vec<[f64; 2]>)> {
    if !(alpha > 0.5 && alpha.is_finite()) {
        return Err(FdrsError::InvalidParameter(format!("alpha = {alpha} must exceed 1/2")));
    }
    if blocks == 0 {
        return Err(FdrsError::InvalidParameter("need at least one block".into()));
    }
    let cos = (0..blocks).map(|i| (i as f64 / (i + 1) as f64).sqrt()).collect();
    let inst = RotationInstance::new(cos, a)?;
    let kappa = 0.5 + 2.0 * (a + 1.0).powi(2);
    let lead = (2.0 * alpha * kappa).sqrt() * (1.0 / (a + 1.0)).exp();
    let z0 = inst.eigen_start(|i| lead / ((i + 1) as f64).powf(alpha));
    Ok((inst, z0))
}

/// Block eigenvalues `b_n` and indices `n_k` with `b_{n_k}^{k+1}/(n_k+1) > F(k+1)/e`.
#[derive(Clone, Debug, Serialize)]
pub struct SlowSchedule {
    /// `b_n` for `n = 0..=n_{k_max}`, nondecreasing.
    pub b: Vec<f64>,
    /// `n_k` for `k = 0..=k_max`, nondecreasing.
    pub n: Vec<usize>,
    pub eta: f64,
    pub a: f64,
}

impl SlowSchedule {
    /// `c_n = sqrt(b_n (1 + a) - a)`.
    pub fn cosines(&self) -> Vec<f64> {
        self.b.iter().map(|b| (b * (1.0 + self.a) - self.a).max(0.0).sqrt()).collect()
    }

    /// `b_{n_k}^{k+1} / (n_k + 1)`.
    pub fn guaranteed(&self, k: usize) -> f64 {
        let n = self.n[k];
        self.b[n].powi(k as i32 + 1) / (n + 1) as f64
    }
}

/// Default floor `eta`, the midpoint of `(a/(a+1), 1)`.
pub fn default_eta(a: f64) -> f64 {
    0.5 * (1.0 + a / (a + 1.0))
}

/// Builds the schedule for `k = 0..=k_max`.
///
/// `n_k` is the largest index with `n + 1 <= 1/F(k+1)`, which keeps the target
/// `F(k+1)(n+1)/e` below `1/e`, and `b_{n_k}` is raised to just above the
/// `(k+1)`-th root of that target. A decay that reaches `1/(j+1)` only at
/// `t ~ j^4` (as `(t+2)^{-1/4}` does) cannot have strictly increasing `n_k`,
/// so indices are only required to be nondecreasing.
pub fn build_slow_schedule(f: impl Fn(f64) -> f64, k_max: usize, eta: f64, a: f64) -> Result<SlowSchedule> {
    if !(a >= 0.0 && a.is_finite()) {
        return Err(FdrsError::InvalidParameter(format!("a = {a} must be >= 0")));
    }
    let lo = a / (a + 1.0);
    if !(eta > lo && eta < 1.0 - SCHEDULE_EPS0) {
        return Err(FdrsError::InvalidParameter(format!(
            "eta = {eta} outside ({lo}, {})",
            1.0 - SCHEDULE_EPS0
        )));
    }
    let mut prev = f64::INFINITY;
    for j in 1..=k_max + 1 {
        let v = f(j as f64);
        if !(v > 0.0 && v < 1.0 && v < prev) {
            return Err(FdrsError::InvalidParameter(format!(
                "F must be strictly decreasing into (0, 1); F({j}) = {v}"
            )));
        }
        prev = v;
    }
    let inv_e = (-1.0f64).exp();
    let mut b: Vec<f64> = Vec::new();
    let mut n = Vec::with_capacity(k_max + 1);
    let mut running = eta + SCHEDULE_EPS0;
    for k in 0..=k_max {
        let fk = f((k + 1) as f64);
        let nk = ((1.0 / fk).floor() as usize).saturating_sub(1).max(n.last().copied().unwrap_or(0));
        let target = inv_e * fk * (nk + 1) as f64;
        if !(target < 1.0) {
            return Err(FdrsError::InvalidParameter(format!("no admissible b at k = {k}")));
        }
        let root = target.powf(1.0 / (k + 1) as f64);
        let need = root + SCHEDULE_EPS0 * (1.0 - root);
        while b.len() <= nk {
            b.push(running);
        }
        b[nk] = b[nk].max(need);
        running = running.max(b[nk]);
        for later in b.iter_mut().skip(nk + 1) {
            *later = later.max(running);
        }
        n.push(nk);
    }
    Ok(SlowSchedule { b, n, eta, a })
}

/// The instance of the arbitrarily-slow construction with `N = n_{k_max} + 1`
/// blocks and `||z0_i|| = 1/(i+1)`.
pub fn arbitrarily_slow_instance(
    f: impl Fn(f64) -> f64,
    a: f64,
    k_max: usize,
    eta: f64,
) -> Result<(RotationInstance, Vec<[f64; 2]>, SlowSchedule)> {
    let schedule = build_slow_schedule(f, k_max, eta, a)?;
    let inst = RotationInstance::new(schedule.cosines(), a)?;
    let z0 = inst.eigen_start(|i| 1.0 / (i + 1) as f64);
    Ok((inst, z0, schedule))
}

/// Flattens block pairs into a vector in the interleaved layout of `split_problem`.
pub fn flatten_blocks(z: &[[f64; 2]]) -> Vector {
    Vector::from_iterator(2 * z.len(), z.iter().flat_map(|b| b.iter().copied()))
}
