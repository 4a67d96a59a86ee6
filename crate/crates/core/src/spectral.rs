//! Dominant-eigenvalue estimates for `Q` and `P_V Q P_V`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{check_dim, FdrsError, Result};
use crate::linalg::{Matrix, Vector};
use crate::subspace::Subspace;

pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_TOL: f64 = 1e-9;
pub const DEFAULT_MAX_ITER: usize = 200_000;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SpectralEstimate {
    pub value: f64,
    pub iterations: usize,
    /// `||M v - value v|| / value`, or 0 for the zero map.
    pub residual: f64,
}

/// Power iteration state, exposed so tests can inspect Rayleigh quotients.
struct PowerIter<F> {
    apply: F,
    v: Vector,
}

impl<F: Fn(&Vector) -> Vector> PowerIter<F> {
    fn new(apply: F, dim: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v = Vector::from_fn(dim, |_, _| rng.sample::<f64, _>(StandardNormal));
        let v = v.normalize();
        Self { apply, v }
    }

    /// Returns `(rayleigh, residual, ||Mv||)` at the current vector, then advances.
    fn step(&mut self) -> (f64, f64, f64) {
        let w = (self.apply)(&self.v);
        let norm = w.norm();
        if norm == 0.0 {
            return (0.0, 0.0, 0.0);
        }
        let theta = self.v.dot(&w);
        let residual = (&w - &self.v * theta).norm() / theta;
        self.v = w / norm;
        (theta, residual, norm)
    }
}

/// Dominant eigenvalue of a symmetric PSD map, stopping on relative eigen-residual.
pub fn power_method<F: Fn(&Vector) -> Vector>(
    apply: F,
    dim: usize,
    tol: f64,
    max_iter: usize,
    seed: u64,
) -> Result<SpectralEstimate> {
    if dim == 0 {
        return Err(FdrsError::InvalidParameter("power method on a 0-dim space".into()));
    }
    if !(tol > 0.0) {
        return Err(FdrsError::InvalidParameter(format!("tol = {tol} must be positive")));
    }
    let mut it = PowerIter::new(apply, dim, seed);
    let mut last = f64::INFINITY;
    for i in 1..=max_iter {
        let (theta, residual, norm) = it.step();
        if norm == 0.0 {
            return Ok(SpectralEstimate { value: 0.0, iterations: i, residual: 0.0 });
        }
        if !theta.is_finite() {
            return Err(FdrsError::Factorization("power iterate is not finite".into()));
        }
        last = residual;
        if residual <= tol {
            return Ok(SpectralEstimate { value: theta, iterations: i, residual });
        }
    }
    Err(FdrsError::NoConvergence { iterations: max_iter, residual: last })
}

#[derive(Clone, Debug, Serialize)]
pub struct BetaEstimate {
    /// `1 / lambda_max(Q)`, infinite when `Q = 0`.
    pub beta: f64,
    /// `1 / lambda_max(P_V Q P_V)`, infinite when `Q` vanishes on `V`.
    pub beta_v: f64,
    pub lambda_max_q: SpectralEstimate,
    pub lambda_max_pqp: SpectralEstimate,
    pub advisory: Option<String>,
}

impl BetaEstimate {
    /// `beta_V / beta`.
    pub fn ratio(&self) -> f64 {
        self.beta_v / self.beta
    }
}

pub fn estimate_betas(q: &Matrix, v: &Subspace, tol: f64) -> Result<BetaEstimate> {
    estimate_betas_seeded(q, v, tol, DEFAULT_MAX_ITER, DEFAULT_SEED)
}

pub fn estimate_betas_seeded(
    q: &Matrix,
    v: &Subspace,
    tol: f64,
    max_iter: usize,
    seed: u64,
) -> Result<BetaEstimate> {
    let n = q.nrows();
    check_dim(n, q.ncols())?;
    check_dim(n, v.dim())?;
    let lq = power_method(|x| q * x, n, tol, max_iter, seed)?;
    let pqp = |x: &Vector| {
        let px = v.project(x).expect("dimension checked");
        v.project(&(q * px)).expect("dimension checked")
    };
    let lv = power_method(pqp, n, tol, max_iter, seed)?;
    let beta = 1.0 / lq.value;
    let mut advisory = None;
    let beta_v = if lv.value == 0.0 {
        advisory = Some(
            "Q vanishes on V: beta_V is unbounded and gamma must be capped by the caller".into(),
        );
        f64::INFINITY
    } else {
        // P_V Q P_V never has a larger top eigenvalue than Q; round-off may say otherwise.
        (1.0 / lv.value).max(beta)
    };
    Ok(BetaEstimate { beta, beta_v, lambda_max_q: lq, lambda_max_pqp: lv, advisory })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::SymmetricEigen;

    fn random_psd(n: usize, seed: u64) -> Matrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = Matrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
        m.transpose() * m / n as f64
    }

    #[test]
    fn diagonal_and_identity() {
        let d = Matrix::from_diagonal(&Vector::from_column_slice(&[1.0, 2.0, 3.0]));
        let e = power_method(|x| &d * x, 3, 1e-10, 10_000, 42).unwrap();
        assert_relative_eq!(e.value, 3.0, max_relative = 1e-12);
        assert!(e.residual <= 1e-10);
        for n in [1, 5, 40] {
            let e = power_method(|x| x.clone(), n, 1e-12, 10, 7).unwrap();
            assert_relative_eq!(e.value, 1.0, max_relative = 1e-15);
            assert_eq!(e.iterations, 1);
        }
    }

    #[test]
    fn zero_map_reports_zero() {
        let e = power_method(|x| x * 0.0, 4, 1e-8, 10, 1).unwrap();
        assert_eq!(e.value, 0.0);
    }

    #[test]
    fn matches_dense_eigensolver() {
        for seed in 0..5 {
            let q = random_psd(50, seed);
            let dense = SymmetricEigen::new(q.clone()).eigenvalues.max();
            let e = power_method(|x| &q * x, 50, 1e-7, 200_000, 42).unwrap();
            assert_relative_eq!(e.value, dense, max_relative = 1e-8);
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let q = random_psd(20, 3);
        let a = power_method(|x| &q * x, 20, 1e-8, 100_000, 42).unwrap();
        let b = power_method(|x| &q * x, 20, 1e-8, 100_000, 42).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn non_convergence_is_an_error() {
        let q = random_psd(30, 4);
        assert!(matches!(
            power_method(|x| &q * x, 30, 1e-14, 3, 42),
            Err(FdrsError::NoConvergence { .. })
        ));
    }

    #[test]
    fn rayleigh_quotients_are_nondecreasing() {
        let q = random_psd(30, 5);
        let mut it = PowerIter::new(|x: &Vector| &q * x, 30, 42);
        let mut prev = 0.0;
        for _ in 0..200 {
            let (theta, _, _) = it.step();
            assert!(theta >= prev - 1e-12 * theta.abs());
            prev = theta;
        }
    }

    #[test]
    fn beta_examples() {
        let q = Matrix::identity(3, 3);
        let v = Subspace::span(Matrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 0.0, 0.0])).unwrap();
        let b = estimate_betas(&q, &v, 1e-10).unwrap();
        assert_relative_eq!(b.beta, 1.0, max_relative = 1e-12);
        assert_relative_eq!(b.beta_v, 1.0, max_relative = 1e-12);

        let q = Matrix::from_diagonal(&Vector::from_column_slice(&[100.0, 1.0]));
        let v = Subspace::span(Matrix::from_column_slice(2, 1, &[0.0, 1.0])).unwrap();
        let b = estimate_betas(&q, &v, 1e-10).unwrap();
        assert_relative_eq!(b.beta, 0.01, max_relative = 1e-12);
        assert_relative_eq!(b.beta_v, 1.0, max_relative = 1e-12);
        assert_relative_eq!(b.ratio(), 100.0, max_relative = 1e-12);
        assert!(b.advisory.is_none());
    }

    #[test]
    fn q_vanishing_on_v_gives_infinite_beta_v() {
        let q = Matrix::from_diagonal(&Vector::from_column_slice(&[2.0, 0.0]));
        let v = Subspace::span(Matrix::from_column_slice(2, 1, &[0.0, 1.0])).unwrap();
        let b = estimate_betas(&q, &v, 1e-10).unwrap();
        assert_eq!(b.beta_v, f64::INFINITY);
        assert!(b.advisory.is_some());
    }

    #[test]
    fn beta_v_dominates_beta_on_random_subspaces() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for seed in 0..10 {
            let q = random_psd(15, seed);
            let a = Matrix::from_fn(3, 15, |_, _| rng.sample::<f64, _>(StandardNormal));
            let v = Subspace::null_space(&a);
            let b = estimate_betas(&q, &v, 1e-9).unwrap();
            assert!(b.beta_v >= b.beta * (1.0 - 1e-9));
        }
    }
}
