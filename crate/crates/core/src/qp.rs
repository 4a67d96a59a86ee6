//! Box- and equality-constrained quadratic programs
//! `min 1/2 x'Qx + c'x` s.t. `l <= x <= u`, `Ax = b`, posed as split problems.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{check_dim, FdrsError, Result};
use crate::functions::FunctionDescriptor;
use crate::linalg::{Matrix, Vector};
use crate::spectral::{estimate_betas, BetaEstimate};
use crate::subspace::{affine_reduction, AffineReduction};

/// Default seed for generated problems.
pub const DEFAULT_PROBLEM_SEED: u64 = 7;

#[derive(Clone, Debug)]
pub struct QpSpec {
    pub q: Matrix,
    pub c: Vector,
    pub lower: Vector,
    pub upper: Vector,
    pub a: Matrix,
    pub b: Vector,
}

impl QpSpec {
    pub fn dim(&self) -> usize {
        self.q.nrows()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.dim();
        if n == 0 {
            return Err(FdrsError::InvalidParameter("empty QP".into()));
        }
        check_dim(n, self.q.ncols())?;
        check_dim(n, self.c.len())?;
        check_dim(n, self.lower.len())?;
        check_dim(n, self.upper.len())?;
        check_dim(n, self.a.ncols())?;
        check_dim(self.a.nrows(), self.b.len())?;
        if self.lower.iter().zip(self.upper.iter()).any(|(l, u)| !(l <= u)) {
            return Err(FdrsError::InvalidParameter("box lower bound exceeds upper".into()));
        }
        Ok(())
    }

    /// `f` = box indicator, `g` = the quadratic, `V = null(A)`, shifted so the
    /// constraint set becomes a subspace.
    pub fn reduce(&self) -> Result<AffineReduction> {
        self.validate()?;
        let f = FunctionDescriptor::box_indicator(self.lower.clone(), self.upper.clone())?;
        let g = FunctionDescriptor::quadratic(self.q.clone(), self.c.clone())?;
        affine_reduction(&f, &g, &self.a, &self.b)
    }

    /// As `reduce`, with `beta_V` estimated by power iteration.
    pub fn reduce_with_spectral(&self, tol: f64) -> Result<(AffineReduction, BetaEstimate)> {
        let mut red = self.reduce()?;
        let est = estimate_betas(&self.q, red.problem.subspace(), tol)?;
        if est.beta_v.is_finite() {
            red.problem = red.problem.with_beta_v(est.beta_v)?;
        }
        Ok((red, est))
    }

    /// Objective in the original coordinates.
    pub fn objective(&self, x: &Vector) -> f64 {
        0.5 * x.dot(&(&self.q * x)) + self.c.dot(x)
    }
}

/// A random convex QP: `Q = M'M/n` with `M` Gaussian, `c` Gaussian, box
/// `[0, 1]^n`, `A` Gaussian with `rows` rows and `b = A x0` for an interior
/// point `x0`, so the problem is always feasible.
pub fn random_qp(dim: usize, rows: usize, seed: u64) -> Result<QpSpec> {
    if dim == 0 || rows >= dim {
        return Err(FdrsError::InvalidParameter(format!(
            "need 0 < rows < dim, got rows = {rows}, dim = {dim}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut normal = || rng.sample::<f64, _>(StandardNormal);
    let m = Matrix::from_fn(dim, dim, |_, _| normal());
    let q = m.transpose() * &m / dim as f64;
    let q = (&q + q.transpose()) * 0.5;
    let c = Vector::from_fn(dim, |_, _| normal());
    let a = Matrix::from_fn(rows, dim, |_, _| normal());
    let x0 = Vector::from_fn(dim, |_, _| rng.random_range(0.25..0.75));
    let b = &a * x0;
    Ok(QpSpec { q, c, lower: Vector::zeros(dim), upper: Vector::repeat(dim, 1.0), a, b })
}

/// The reduced split problem of `random_qp` with `beta_V` estimated.
pub fn random_qp_problem(dim: usize, rows: usize, seed: u64) -> Result<(QpSpec, AffineReduction)> {
    let spec = random_qp(dim, rows, seed)?;
    let (red, _) = spec.reduce_with_spectral(crate::spectral::DEFAULT_TOL)?;
    Ok((spec, red))
}
