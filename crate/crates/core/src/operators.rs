//! The split problem, the FDRS operator and averaged-operator constants.

use crate::error::{check_dim, FdrsError, Result};
use crate::functions::FunctionDescriptor;
use crate::linalg::Vector;
use crate::subspace::Subspace;

/// `min f(x) + g(x)` over the subspace `V`, with `h = g o P_V`.
#[derive(Clone, Debug)]
pub struct SplitProblem {
    f: FunctionDescriptor,
    g: FunctionDescriptor,
    v: Subspace,
    beta: f64,
    beta_v: f64,
}

impl SplitProblem {
    /// `beta_V` starts at `beta`, which is always admissible.
    pub fn new(f: FunctionDescriptor, g: FunctionDescriptor, v: Subspace) -> Result<Self> {
        check_dim(v.dim(), f.dim())?;
        check_dim(v.dim(), g.dim())?;
        if !g.is_smooth() {
            return Err(FdrsError::NotSmooth(g.name()));
        }
        let beta = g.beta();
        if !(beta > 0.0) {
            return Err(FdrsError::InvalidParameter("g needs a Lipschitz gradient".into()));
        }
        Ok(Self {
            f,
            g,
            v,
            beta,
            beta_v: beta,
        })
    }

    /// Overrides `beta_V`; must not be below `beta` beyond rounding.
    pub fn with_beta_v(mut self, beta_v: f64) -> Result<Self> {
        if !(beta_v >= self.beta * (1.0 - 1e-9)) {
            return Err(FdrsError::InvalidParameter(format!(
                "beta_V = {beta_v} is below beta = {}",
                self.beta
            )));
        }
        self.beta_v = beta_v.max(self.beta);
        Ok(self)
    }

    pub fn f(&self) -> &FunctionDescriptor {
        &self.f
    }

    pub fn g(&self) -> &FunctionDescriptor {
        &self.g
    }

    pub fn subspace(&self) -> &Subspace {
        &self.v
    }

    pub fn dim(&self) -> usize {
        self.v.dim()
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn beta_v(&self) -> f64 {
        self.beta_v
    }

    pub fn mu_f(&self) -> f64 {
        self.f.mu()
    }

    pub fn mu_g(&self) -> f64 {
        self.g.mu()
    }

    pub fn beta_f(&self) -> f64 {
        self.f.beta()
    }

    /// `h(x) = g(P_V x)`.
    pub fn h(&self, x: &Vector) -> Result<f64> {
        self.g.eval(&self.v.project(x)?)
    }

    /// `grad h(x) = P_V grad g(P_V x)`.
    pub fn grad_h(&self, x: &Vector) -> Result<Vector> {
        self.grad_h_at_projected(&self.v.project(x)?)
    }

    fn grad_h_at_projected(&self, x_h: &Vector) -> Result<Vector> {
        self.v.project(&self.g.grad(x_h)?)
    }
}

/// One application of the FDRS operator with every intermediate quantity.
#[derive(Clone, Debug)]
pub struct FdrsStep {
    pub z_next: Vector,
    pub x_h: Vector,
    pub x_f: Vector,
    pub subgrad_chi: Vector,
    pub grad_h: Vector,
    pub subgrad_f: Vector,
}

impl FdrsStep {
    /// `||T z - z||^2 = ||x_f - x_h||^2`.
    pub fn fpr_sq(&self) -> f64 {
        crate::linalg::dist_sq(&self.x_f, &self.x_h)
    }
}

/// Averagedness coefficient of `T1 o T2` for `a1`- and `a2`-averaged maps.
pub fn averaged_composition_coefficient(a1: f64, a2: f64) -> Result<f64> {
    for a in [a1, a2] {
        if !(a > 0.0 && a < 1.0) {
            return Err(FdrsError::InvalidParameter(format!("coefficient {a} outside (0, 1)")));
        }
    }
    Ok((a1 + a2 - 2.0 * a1 * a2) / (1.0 - a1 * a2))
}

/// `2 beta_V / (4 beta_V - gamma)` for `gamma` in `(0, 2 beta_V)`.
pub fn alpha_fdrs(gamma: f64, beta_v: f64) -> Result<f64> {
    if !(gamma > 0.0 && gamma < 2.0 * beta_v) {
        return Err(FdrsError::InvalidParameter(format!(
            "gamma = {gamma} outside (0, 2 beta_V) with beta_V = {beta_v}"
        )));
    }
    if beta_v.is_infinite() {
        return Ok(0.5);
    }
    Ok(2.0 * beta_v / (4.0 * beta_v - gamma))
}

/// `T_FDRS z` together with `x_h`, `x_f` and the subgradients they define.
pub fn apply_fdrs(p: &SplitProblem, z: &Vector, gamma: f64) -> Result<FdrsStep> {
    check_dim(p.dim(), z.len())?;
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(FdrsError::InvalidParameter(format!("gamma = {gamma} must be positive")));
    }
    let x_h = p.v.project(z)?;
    let grad_h = p.grad_h_at_projected(&x_h)?;
    let complement = z - &x_h;
    // refl_V(z - gamma grad_h) = x_h - gamma grad_h - P_{V-perp} z
    let reflected = &x_h - &grad_h * gamma - &complement;
    let x_f = p.f.prox(&reflected, gamma)?;
    let subgrad_f = (&reflected - &x_f) / gamma;
    let subgrad_chi = &complement / gamma;
    let z_next = &x_f + &complement;
    Ok(FdrsStep {
        z_next,
        x_h,
        x_f,
        subgrad_chi,
        grad_h,
        subgrad_f,
    })
}

/// `(1 - lambda) z + lambda T z`.
pub fn relax(z: &Vector, tz: &Vector, lambda: f64) -> Vector {
    z * (1.0 - lambda) + tz * lambda
}

/// `z* = x* + gamma * subgrad_chi*`, verified to be a fixed point.
pub fn fixed_point_from_minimizer(
    p: &SplitProblem,
    x_star: &Vector,
    subgrad_chi_star: &Vector,
    gamma: f64,
) -> Result<Vector> {
    check_dim(p.dim(), x_star.len())?;
    check_dim(p.dim(), subgrad_chi_star.len())?;
    let z = x_star + subgrad_chi_star * gamma;
    let residual = (apply_fdrs(p, &z, gamma)?.z_next - &z).norm();
    let tolerance = 1e-10 * (1.0 + z.norm());
    if residual > tolerance {
        return Err(FdrsError::NotOptimal { residual, tolerance });
    }
    Ok(z)
}
