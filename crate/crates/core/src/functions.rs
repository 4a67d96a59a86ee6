//! Convex function descriptors with exact proximal maps.
//!
//! `beta` is the reciprocal Lipschitz constant of the gradient. Zero and a
//! quadratic with `Q = 0` have a constant gradient, which is recorded as
//! `beta = +inf`; nonsmooth variants record `beta = 0`.

use std::fmt;
use std::sync::Mutex;

use nalgebra::{Cholesky, Dyn, SymmetricEigen};

use crate::error::{check_dim, FdrsError, Result};
use crate::linalg::{Matrix, Vector};
use crate::subspace::Subspace;

/// Relative tolerance for indicator-domain membership.
pub const TOL_DOM: f64 = 1e-9;

#[derive(Clone, Debug)]
pub enum FunctionKind {
    Zero { dim: usize },
    Quadratic { q: Matrix, c: Vector },
    BoxIndicator { lower: Vector, upper: Vector },
    SubspacePlusScaledSqNorm { subspace: Subspace, a: f64 },
    ShiftedScaledSqNorm { a: f64, center: Vector },
}

pub struct FunctionDescriptor {
    kind: FunctionKind,
    mu: f64,
    beta: f64,
    factor_cache: Mutex<Option<(f64, Cholesky<f64, Dyn>)>>,
}

impl Clone for FunctionDescriptor {
    fn clone(&self) -> Self {
        Self::with_constants(self.kind.clone(), self.mu, self.beta)
    }
}

impl fmt::Debug for FunctionDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FunctionDescriptor")
            .field("kind", &self.kind)
            .field("mu", &self.mu)
            .field("beta", &self.beta)
            .finish()
    }
}

impl FunctionDescriptor {
    fn with_constants(kind: FunctionKind, mu: f64, beta: f64) -> Self {
        Self {
            kind,
            mu,
            beta,
            factor_cache: Mutex::new(None),
        }
    }

    pub fn zero(dim: usize) -> Self {
        Self::with_constants(FunctionKind::Zero { dim }, 0.0, f64::INFINITY)
    }

    /// `x -> 0.5 x'Qx + c'x`. Computes `mu = lambda_min(Q)` and
    /// `beta = 1/lambda_max(Q)` by a dense symmetric eigendecomposition.
    pub fn quadratic(q: Matrix, c: Vector) -> Result<Self> {
        let d = c.len();
        if q.nrows() != d || q.ncols() != d {
            return Err(FdrsError::DimensionMismatch {
                expected: d,
                got: q.nrows(),
            });
        }
        let scale = q.amax();
        let asym = (&q - q.transpose()).amax();
        if asym > 1e-12 * scale.max(f64::MIN_POSITIVE) {
            return Err(FdrsError::InvalidParameter(format!(
                "Q is not symmetric (max asymmetry {asym:e})"
            )));
        }
        let (lmin, lmax) = if d == 0 || scale == 0.0 {
            (0.0, 0.0)
        } else {
            let eig = SymmetricEigen::new(q.clone());
            (eig.eigenvalues.min(), eig.eigenvalues.max())
        };
        if lmin < -1e-10 * lmax.abs().max(lmin.abs()) {
            return Err(FdrsError::InvalidParameter(format!(
                "Q is not positive semidefinite (lambda_min = {lmin:e})"
            )));
        }
        let beta = if lmax > 0.0 { 1.0 / lmax } else { f64::INFINITY };
        Ok(Self::with_constants(
            FunctionKind::Quadratic { q, c },
            lmin.max(0.0),
            beta,
        ))
    }

    /// Indicator of `{x : lower <= x <= upper}`; infinite bounds are allowed.
    pub fn box_indicator(lower: Vector, upper: Vector) -> Result<Self> {
        check_dim(lower.len(), upper.len())?;
        if lower.iter().zip(upper.iter()).any(|(l, u)| l > u || l.is_nan() || u.is_nan()) {
            return Err(FdrsError::InvalidParameter(
                "box requires lower <= upper".into(),
            ));
        }
        Ok(Self::with_constants(
            FunctionKind::BoxIndicator { lower, upper },
            0.0,
            0.0,
        ))
    }

    /// `chi_U + (a/2)||.||^2`.
    pub fn subspace_plus_scaled_sq_norm(subspace: Subspace, a: f64) -> Result<Self> {
        if !(a >= 0.0 && a.is_finite()) {
            return Err(FdrsError::InvalidParameter(format!("a = {a} must be >= 0")));
        }
        Ok(Self::with_constants(
            FunctionKind::SubspacePlusScaledSqNorm { subspace, a },
            a,
            0.0,
        ))
    }

    /// `(a/2)||x - center||^2`.
    pub fn shifted_scaled_sq_norm(a: f64, center: Vector) -> Result<Self> {
        if !(a > 0.0 && a.is_finite()) {
            return Err(FdrsError::InvalidParameter(format!("a = {a} must be > 0")));
        }
        Ok(Self::with_constants(
            FunctionKind::ShiftedScaledSqNorm { a, center },
            a,
            1.0 / a,
        ))
    }

    pub fn kind(&self) -> &FunctionKind {
        &self.kind
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn dim(&self) -> usize {
        match &self.kind {
            FunctionKind::Zero { dim } => *dim,
            FunctionKind::Quadratic { c, .. } => c.len(),
            FunctionKind::BoxIndicator { lower, .. } => lower.len(),
            FunctionKind::SubspacePlusScaledSqNorm { subspace, .. } => subspace.dim(),
            FunctionKind::ShiftedScaledSqNorm { center, .. } => center.len(),
        }
    }

    pub fn is_smooth(&self) -> bool {
        matches!(
            self.kind,
            FunctionKind::Zero { .. }
                | FunctionKind::Quadratic { .. }
                | FunctionKind::ShiftedScaledSqNorm { .. }
        )
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            FunctionKind::Zero { .. } => "zero function",
            FunctionKind::Quadratic { .. } => "quadratic",
            FunctionKind::BoxIndicator { .. } => "box indicator",
            FunctionKind::SubspacePlusScaledSqNorm { .. } => "subspace indicator plus squared norm",
            FunctionKind::ShiftedScaledSqNorm { .. } => "shifted squared norm",
        }
    }

    /// Extended-real value; `+inf` outside an indicator domain beyond
    /// `TOL_DOM * (1 + ||x||)`.
    pub fn eval(&self, x: &Vector) -> Result<f64> {
        check_dim(self.dim(), x.len())?;
        let tol = TOL_DOM * (1.0 + x.norm());
        Ok(match &self.kind {
            FunctionKind::Zero { .. } => 0.0,
            FunctionKind::Quadratic { q, c } => 0.5 * x.dot(&(q * x)) + c.dot(x),
            FunctionKind::BoxIndicator { lower, upper } => {
                let violation = x
                    .iter()
                    .zip(lower.iter().zip(upper.iter()))
                    .map(|(xi, (l, u))| (l - xi).max(xi - u).max(0.0))
                    .fold(0.0, f64::max);
                if violation > tol {
                    f64::INFINITY
                } else {
                    0.0
                }
            }
            FunctionKind::SubspacePlusScaledSqNorm { subspace, a } => {
                if subspace.project_complement(x)?.norm() > tol {
                    f64::INFINITY
                } else {
                    0.5 * a * x.norm_squared()
                }
            }
            FunctionKind::ShiftedScaledSqNorm { a, center } => 0.5 * a * (x - center).norm_squared(),
        })
    }

    pub fn prox(&self, x: &Vector, gamma: f64) -> Result<Vector> {
        check_dim(self.dim(), x.len())?;
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(FdrsError::InvalidParameter(format!(
                "prox step gamma = {gamma} must be positive"
            )));
        }
        match &self.kind {
            FunctionKind::Zero { .. } => Ok(x.clone()),
            FunctionKind::Quadratic { q, c } => {
                let rhs = x - c * gamma;
                let mut cache = self
                    .factor_cache
                    .lock()
                    .map_err(|_| FdrsError::Factorization("poisoned factor cache".into()))?;
                let stale = !matches!(&*cache, Some((g, _)) if *g == gamma);
                if stale {
                    let m = Matrix::identity(q.nrows(), q.ncols()) + q * gamma;
                    let chol = Cholesky::new(m).ok_or_else(|| {
                        FdrsError::Factorization("I + gamma Q is not positive definite".into())
                    })?;
                    *cache = Some((gamma, chol));
                }
                let (_, chol) = cache.as_ref().expect("factor cached above");
                Ok(chol.solve(&rhs))
            }
            FunctionKind::BoxIndicator { lower, upper } => Ok(Vector::from_iterator(
                x.len(),
                x.iter()
                    .zip(lower.iter().zip(upper.iter()))
                    .map(|(xi, (l, u))| xi.max(*l).min(*u)),
            )),
            FunctionKind::SubspacePlusScaledSqNorm { subspace, a } => {
                Ok(subspace.project(x)? / (1.0 + gamma * a))
            }
            FunctionKind::ShiftedScaledSqNorm { a, center } => {
                Ok((x + center * (gamma * a)) / (1.0 + gamma * a))
            }
        }
    }

    pub fn grad(&self, x: &Vector) -> Result<Vector> {
        check_dim(self.dim(), x.len())?;
        match &self.kind {
            FunctionKind::Zero { dim } => Ok(Vector::zeros(*dim)),
            FunctionKind::Quadratic { q, c } => Ok(q * x + c),
            FunctionKind::ShiftedScaledSqNorm { a, center } => Ok((x - center) * *a),
            _ => Err(FdrsError::NotSmooth(self.name())),
        }
    }

    pub fn refl(&self, x: &Vector, gamma: f64) -> Result<Vector> {
        Ok(self.prox(x, gamma)? * 2.0 - x)
    }

    /// The function `x -> self(x + shift)`, up to an additive constant.
    pub fn shifted(&self, shift: &Vector) -> Result<Self> {
        check_dim(self.dim(), shift.len())?;
        let kind = match &self.kind {
            FunctionKind::Zero { dim } => FunctionKind::Zero { dim: *dim },
            FunctionKind::Quadratic { q, c } => FunctionKind::Quadratic {
                q: q.clone(),
                c: c + q * shift,
            },
            FunctionKind::BoxIndicator { lower, upper } => FunctionKind::BoxIndicator {
                lower: lower - shift,
                upper: upper - shift,
            },
            FunctionKind::ShiftedScaledSqNorm { a, center } => FunctionKind::ShiftedScaledSqNorm {
                a: *a,
                center: center - shift,
            },
            FunctionKind::SubspacePlusScaledSqNorm { .. } => {
                if shift.iter().all(|v| *v == 0.0) {
                    self.kind.clone()
                } else {
                    return Err(FdrsError::InvalidParameter(
                        "a shifted subspace indicator is not representable".into(),
                    ));
                }
            }
        };
        Ok(Self::with_constants(kind, self.mu, self.beta))
    }
}

/// The lower-bound term `S` for a function with constants `(mu, beta)`:
/// `max{mu/2 ||x-y||^2, beta/2 ||gx - gy||^2}` when `beta > 0`, otherwise
/// only the first term. `grad_diff_sq` is `||grad(x) - grad(y)||^2`.
pub fn s_term(mu: f64, beta: f64, dist_sq: f64, grad_diff_sq: f64) -> f64 {
    let curvature = 0.5 * mu * dist_sq;
    if beta > 0.0 {
        let cocoercive = if grad_diff_sq == 0.0 { 0.0 } else { 0.5 * beta * grad_diff_sq };
        curvature.max(cocoercive)
    } else {
        curvature
    }
}
