//! Shared fixtures: random split problems, an active-set QP oracle and the
//! trace corruptions used by the negative controls.
#![allow(dead_code)]

use fdrs_core::certificates::{self, CertificateEntry, ReferenceSolution};
use fdrs_core::functions::FunctionDescriptor;
use fdrs_core::linalg::{Matrix, Vector};
use fdrs_core::operators::{apply_fdrs, SplitProblem};
use fdrs_core::solver::{run, IterationTrace, LambdaSchedule, SolveConfig};
use fdrs_core::subspace::Subspace;
use nalgebra::{SymmetricEigen, SVD};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn gaussian_vec(rng: &mut ChaCha8Rng, n: usize) -> Vector {
    Vector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal))
}

pub fn gaussian_mat(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Matrix {
    Matrix::from_fn(r, c, |_, _| rng.sample::<f64, _>(StandardNormal))
}

pub fn random_psd(rng: &mut ChaCha8Rng, n: usize) -> Matrix {
    let m = gaussian_mat(rng, n, n);
    m.transpose() * m / n as f64
}

pub fn random_subspace(rng: &mut ChaCha8Rng, d: usize) -> Subspace {
    match rng.random_range(0..5) {
        0 => Subspace::whole(d),
        1 => {
            let k = rng.random_range(1..d);
            Subspace::span_of(&gaussian_mat(rng, d, k))
        }
        2 if d % 2 == 0 => Subspace::block_axis(d / 2),
        3 if d % 2 == 0 => {
            let cos: Vec<f64> = (0..d / 2).map(|_| rng.random_range(0.0..0.99)).collect();
            Subspace::block_rotation_from_cosines(&cos).unwrap()
        }
        _ => {
            let m = rng.random_range(1..d);
            Subspace::null_space(&gaussian_mat(rng, m, d))
        }
    }
}

/// A problem with randomly chosen `f`, `g` and `V` variants.
pub fn random_problem(rng: &mut ChaCha8Rng, d: usize) -> SplitProblem {
    let f = match rng.random_range(0..5) {
        0 => FunctionDescriptor::zero(d),
        1 => {
            // the box contains 0, which lies in every V, so the problem is feasible
            let l = -gaussian_vec(rng, d).abs();
            let u = gaussian_vec(rng, d).abs();
            FunctionDescriptor::box_indicator(l, u).unwrap()
        }
        2 => FunctionDescriptor::quadratic(random_psd(rng, d), gaussian_vec(rng, d)).unwrap(),
        3 => {
            let u = random_subspace(rng, d);
            FunctionDescriptor::subspace_plus_scaled_sq_norm(u, rng.random_range(0.0..3.0)).unwrap()
        }
        _ => FunctionDescriptor::shifted_scaled_sq_norm(rng.random_range(0.1..3.0), gaussian_vec(rng, d)).unwrap(),
    };
    let g = match rng.random_range(0..2) {
        0 => FunctionDescriptor::quadratic(random_psd(rng, d) + Matrix::identity(d, d) * 0.01, gaussian_vec(rng, d))
            .unwrap(),
        _ => FunctionDescriptor::shifted_scaled_sq_norm(rng.random_range(0.1..3.0), gaussian_vec(rng, d)).unwrap(),
    };
    SplitProblem::new(f, g, random_subspace(rng, d)).unwrap()
}

/// Dense matrix of `P_V`.
pub fn projector_matrix(v: &Subspace) -> Matrix {
    let n = v.dim();
    let mut p = Matrix::zeros(n, n);
    for j in 0..n {
        let mut e = Vector::zeros(n);
        e[j] = 1.0;
        p.set_column(j, &v.project(&e).unwrap());
    }
    p
}

/// Unit dominant eigenvector of `P_V Q P_V`.
pub fn dominant_direction(v: &Subspace, q: &Matrix) -> Vector {
    let p = projector_matrix(v);
    let m = &p * q * &p;
    let eig = SymmetricEigen::new((&m + m.transpose()) * 0.5);
    let i = eig.eigenvalues.imax();
    eig.eigenvectors.column(i).into_owned()
}

fn pinv_solve(m: &Matrix, rhs: &Vector) -> Vector {
    let svd = SVD::new(m.clone(), true, true);
    let eps = 1e-12 * svd.singular_values.max().max(1.0);
    svd.solve(rhs, eps).unwrap()
}

/// A point of `{Ax = b} ∩ [l, u]` by alternating projections.
fn feasible_start(a: &Matrix, b: &Vector, l: &Vector, u: &Vector) -> Vector {
    let clamp = |x: &Vector| Vector::from_fn(x.len(), |i, _| x[i].max(l[i]).min(u[i]));
    let aat = a * a.transpose();
    let mut x = clamp(&((l + u) * 0.5));
    for _ in 0..1_000_000 {
        let r = a * &x - b;
        if r.norm() <= 1e-13 * (1.0 + b.norm()) {
            break;
        }
        let y = &x - a.transpose() * pinv_solve(&aat, &r);
        x = clamp(&y);
    }
    x
}

/// Primal active-set method for `min 1/2 x'Qx + c'x`, `l <= x <= u`, `Ax = b`
/// with `Q` positive definite.
pub fn active_set_qp(q: &Matrix, c: &Vector, l: &Vector, u: &Vector, a: &Matrix, b: &Vector) -> Vector {
    let n = q.nrows();
    let m = a.nrows();
    let mut x = feasible_start(a, b, l, u);
    // 0 = free, -1 = at lower, +1 = at upper
    let mut work = vec![0i8; n];
    for _ in 0..100_000 {
        let g = q * &x + c;
        let free: Vec<usize> = (0..n).filter(|&i| work[i] == 0).collect();
        let nf = free.len();
        let mut kkt = Matrix::zeros(nf + m, nf + m);
        let mut rhs = Vector::zeros(nf + m);
        for (r, &i) in free.iter().enumerate() {
            for (s, &j) in free.iter().enumerate() {
                kkt[(r, s)] = q[(i, j)];
            }
            for k in 0..m {
                kkt[(r, nf + k)] = a[(k, i)];
                kkt[(nf + k, r)] = a[(k, i)];
            }
            rhs[r] = -g[i];
        }
        let sol = pinv_solve(&kkt, &rhs);
        let mut p = Vector::zeros(n);
        for (r, &i) in free.iter().enumerate() {
            p[i] = sol[r];
        }
        if p.norm() <= 1e-13 * (1.0 + x.norm()) {
            let nu = sol.rows(nf, m).into_owned();
            let mult = &g + a.transpose() * nu;
            let worst = (0..n)
                .filter(|&i| work[i] != 0)
                .map(|i| (i, if work[i] < 0 { mult[i] } else { -mult[i] }))
                .min_by(|x, y| x.1.total_cmp(&y.1));
            match worst {
                Some((i, v)) if v < -1e-12 * (1.0 + g.norm()) => work[i] = 0,
                _ => return x,
            }
            continue;
        }
        let mut step = 1.0;
        let mut block = None;
        for &i in &free {
            let t = if p[i] < 0.0 {
                (l[i] - x[i]) / p[i]
            } else if p[i] > 0.0 {
                (u[i] - x[i]) / p[i]
            } else {
                f64::INFINITY
            };
            if t < step {
                step = t.max(0.0);
                block = Some((i, if p[i] < 0.0 { -1 } else { 1 }));
            }
        }
        x += &p * step;
        if let Some((i, side)) = block {
            work[i] = side;
            x[i] = if side < 0 { l[i] } else { u[i] };
        }
    }
    panic!("active-set oracle did not terminate");
}

/// Largest KKT violation of `x`, with multipliers fitted on the free coordinates.
pub fn kkt_violation(q: &Matrix, c: &Vector, l: &Vector, u: &Vector, a: &Matrix, b: &Vector, x: &Vector) -> f64 {
    let n = x.len();
    let tol = 1e-9;
    let g = q * x + c;
    let at_l: Vec<bool> = (0..n).map(|i| x[i] - l[i] <= tol).collect();
    let at_u: Vec<bool> = (0..n).map(|i| u[i] - x[i] <= tol).collect();
    let free: Vec<usize> = (0..n).filter(|&i| !at_l[i] && !at_u[i]).collect();
    let af = Matrix::from_fn(free.len(), a.nrows(), |r, k| a[(k, free[r])]);
    let gf = Vector::from_fn(free.len(), |r, _| -g[free[r]]);
    let nu = if free.is_empty() { Vector::zeros(a.nrows()) } else { pinv_solve(&af, &gf) };
    let mult = &g + a.transpose() * nu;
    let mut worst = (a * x - b).amax();
    for i in 0..n {
        worst = worst.max((l[i] - x[i]).max(x[i] - u[i]).max(0.0));
        let v = if at_l[i] && at_u[i] {
            0.0
        } else if at_l[i] {
            (-mult[i]).max(0.0)
        } else if at_u[i] {
            mult[i].max(0.0)
        } else {
            mult[i].abs()
        };
        worst = worst.max(v);
    }
    worst
}

/// A smooth, strongly convex instance on which every certificate applies:
/// `f = (a/2)||x - u||^2`, `g` a positive definite quadratic, `V = null(A)`.
pub struct ControlInstance {
    pub p: SplitProblem,
    pub q: Matrix,
    pub trace: IterationTrace,
    pub reference: ReferenceSolution,
    pub lipschitz: f64,
    pub linear_c: f64,
}

pub const CONTROL_ITERS: usize = 300;

pub fn control_instance() -> ControlInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let d = 12;
    let q = random_psd(&mut rng, d) + Matrix::identity(d, d) * 0.1;
    let g = FunctionDescriptor::quadratic(q.clone(), gaussian_vec(&mut rng, d)).unwrap();
    let a_f = 1.0;
    let center = gaussian_vec(&mut rng, d);
    let f = FunctionDescriptor::shifted_scaled_sq_norm(a_f, center.clone()).unwrap();
    let v = Subspace::null_space(&gaussian_mat(&mut rng, 3, d));
    let p = SplitProblem::new(f, g, v).unwrap();
    let beta_v = 1.0 / SymmetricEigen::new({
        let pm = projector_matrix(p.subspace());
        &pm * &q * &pm
    })
    .eigenvalues
    .max();
    let p = p.with_beta_v(beta_v).unwrap();
    let gamma = 0.5 * p.beta_v();
    let z0 = gaussian_vec(&mut rng, d) * 3.0;
    let cfg = SolveConfig::new(gamma, z0.clone())
        .with_lambda(LambdaSchedule::Constant(0.5))
        .with_max_iter(CONTROL_ITERS)
        .with_fpr_tol(-1.0);
    let trace = run(&p, &cfg).unwrap();
    let reference = ReferenceSolution::compute(&p, &z0, gamma).unwrap();
    let dd = (&z0 - &reference.z_star).norm();
    // f is a Lipschitz function on B(x*, D) with constant a (||x* - u|| + D)
    let lipschitz = a_f * ((&reference.x_star - &center).norm() + dd);
    ControlInstance { p, q, trace, reference, lipschitz, linear_c: 1.0 }
}

impl ControlInstance {
    pub fn d(&self) -> f64 {
        (&self.trace.z0 - &self.reference.z_star).norm()
    }

    /// All certificates by name.
    pub fn run_all(&self, t: &IterationTrace) -> Vec<CertificateEntry> {
        let (p, r) = (&self.p, &self.reference);
        let mut out = vec![
            certificates::check_fejer(p, t, r).unwrap(),
            certificates::check_fpr_summability(p, t, r).unwrap(),
            certificates::check_fpr_envelope(p, t, r).unwrap(),
            certificates::check_fpr_little_o(p, t, r).unwrap(),
            certificates::check_gradient_sum(p, t, r).unwrap(),
            certificates::check_ergodic_objective(p, t, r).unwrap(),
            certificates::check_nonergodic_objective(p, t, r).unwrap(),
            certificates::check_lipschitz_objective(p, t, r, self.lipschitz).unwrap(),
            certificates::check_linear_convergence(p, t, r, self.linear_c).unwrap(),
            certificates::check_fundamental_upper(p, t, r).unwrap(),
            certificates::check_fundamental_lower(p, t, r).unwrap(),
            certificates::check_fundamental_strong(p, t, r).unwrap(),
            certificates::check_fundamental_smooth(p, t, r).unwrap(),
        ];
        out.extend(certificates::check_strong_convexity(p, t, r).unwrap());
        out.extend(certificates::check_best_iterate_smooth(p, t, r).unwrap());
        out
    }

    /// Replaces iterate `k` by `z^k + w` and recomputes that record, including
    /// its running weighted sums.
    pub fn jump(&self, k: usize, w: &Vector) -> IterationTrace {
        let mut t = self.trace.clone();
        let gamma = t.gamma;
        let prev = if k == 0 { None } else { Some(t.records[k - 1].clone()) };
        let rec = &mut t.records[k];
        let z = &rec.z + w;
        let step = apply_fdrs(&self.p, &z, gamma).unwrap();
        let g_xh = self.p.g().eval(&step.x_h).unwrap();
        rec.fpr_sq = (&step.x_f - &step.x_h).norm_squared();
        rec.feasibility = rec.fpr_sq.sqrt();
        rec.objective_at_xh = self.p.f().eval(&step.x_h).unwrap() + g_xh;
        rec.objective_split = self.p.f().eval(&step.x_f).unwrap() + g_xh;
        let (sh, sf) = match prev {
            Some(p) => (p.weighted_sum_xh, p.weighted_sum_xf),
            None => (Vector::zeros(z.len()), Vector::zeros(z.len())),
        };
        rec.weighted_sum_xh = sh + &step.x_h * rec.lambda;
        rec.weighted_sum_xf = sf + &step.x_f * rec.lambda;
        rec.z = z;
        rec.x_h = step.x_h;
        rec.x_f = step.x_f;
        rec.grad_h = step.grad_h;
        rec.subgrad_chi = step.subgrad_chi;
        rec.subgrad_f = step.subgrad_f;
        t
    }

    /// The jump used for pair and running checks: `1e3 D` along the dominant
    /// eigenvector of `P_V Q P_V`.
    pub fn big_jump(&self, k: usize) -> IterationTrace {
        let w = dominant_direction(self.p.subspace(), &self.q) * (1e3 * self.d());
        self.jump(k, &w)
    }

    /// Iterate `k` becomes non-finite.
    pub fn nan_at(&self, k: usize) -> IterationTrace {
        let mut t = self.trace.clone();
        let rec = &mut t.records[k];
        rec.z.fill(f64::NAN);
        rec.x_h.fill(f64::NAN);
        rec.x_f.fill(f64::NAN);
        rec.grad_h.fill(f64::NAN);
        rec.subgrad_chi.fill(f64::NAN);
        rec.subgrad_f.fill(f64::NAN);
        rec.fpr_sq = f64::NAN;
        rec.objective_at_xh = f64::NAN;
        rec.objective_split = f64::NAN;
        t
    }

    /// The stored `grad_h` at `k` is inflated.
    pub fn bad_gradient_at(&self, k: usize) -> IterationTrace {
        let mut t = self.trace.clone();
        let w = dominant_direction(self.p.subspace(), &self.q) * (1e3 * (1.0 + self.d()));
        t.records[k].grad_h += w;
        t
    }

    /// `x_h` at `k` is moved off `V` to the unconstrained minimizer of `f + g`,
    /// which has a smaller objective than the constrained optimum.
    pub fn off_subspace_at(&self, k: usize) -> IterationTrace {
        let mut t = self.trace.clone();
        let Some(x) = unconstrained_minimizer(&self.p) else {
            panic!("control instance must have smooth f and g");
        };
        let rec = &mut t.records[k];
        rec.objective_at_xh = self.p.f().eval(&x).unwrap() + self.p.g().eval(&x).unwrap();
        rec.x_h = x;
        t
    }
}

/// Minimizer of `f + g` over the whole space for smooth `f` and quadratic `g`.
fn unconstrained_minimizer(p: &SplitProblem) -> Option<Vector> {
    use fdrs_core::functions::FunctionKind;
    let (FunctionKind::ShiftedScaledSqNorm { a, center }, FunctionKind::Quadratic { q, c }) = (p.f().kind(), p.g().kind())
    else {
        return None;
    };
    let n = q.nrows();
    let m = q + Matrix::identity(n, n) * *a;
    m.cholesky().map(|ch| ch.solve(&(center * *a - c)))
}

/// One negative control: which corruption, where, and what the check reported.
pub struct ControlOutcome {
    pub name: String,
    pub corruption: &'static str,
    pub corrupted_at: usize,
    pub reported_at: usize,
    pub failed: bool,
}

impl ControlOutcome {
    pub fn ok(&self) -> bool {
        self.failed && self.reported_at == self.corrupted_at
    }
}

/// Index at which each kind of corruption is placed.
pub const JUMP_AT: usize = 40;
pub const NAN_AT: usize = 57;

/// Corrupts one iterate per certificate and records whether the check fails
/// at that iterate. The baseline run must pass every check.
pub fn negative_controls(ci: &ControlInstance) -> Vec<ControlOutcome> {
    let base = ci.run_all(&ci.trace);
    for e in &base {
        assert!(e.pass, "baseline {} fails: {e:?}", e.name);
    }
    let jump_mid = ci.big_jump(JUMP_AT);
    let jump_first = ci.big_jump(0);
    let nan = ci.nan_at(NAN_AT);
    let grad = ci.bad_gradient_at(JUMP_AT);
    let off = ci.off_subspace_at(JUMP_AT);
    let mut out = Vec::new();
    for e in &base {
        let (corruption, trace, k): (&'static str, &IterationTrace, usize) = match e.name.as_str() {
            "strong_convexity_best" => ("jump at k = 0", &jump_first, 0),
            n if n.ends_with("little_o") => ("non-finite iterate", &nan, NAN_AT),
            "fundamental_lower" => ("inflated grad_h", &grad, JUMP_AT),
            "smooth_nonnegativity" => ("x_h moved off V", &off, JUMP_AT),
            _ => ("jump along dominant direction", &jump_mid, JUMP_AT),
        };
        let entry = ci
            .run_all(trace)
            .into_iter()
            .find(|x| x.name == e.name)
            .expect("same certificates on corrupted trace");
        out.push(ControlOutcome {
            name: e.name.clone(),
            corruption,
            corrupted_at: k,
            reported_at: entry.at_iteration,
            failed: !entry.pass,
        });
    }
    out
}
