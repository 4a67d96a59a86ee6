//! Turning problem flags into a reduced split problem with estimated betas.

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use fdrs_core::linalg::Vector;
use fdrs_core::qp::{random_qp, QpSpec, DEFAULT_PROBLEM_SEED};
use fdrs_core::solver::{default_gamma, GammaMode};
use fdrs_core::spectral::{estimate_betas_seeded, BetaEstimate, DEFAULT_MAX_ITER, DEFAULT_SEED, DEFAULT_TOL};
use fdrs_core::subspace::AffineReduction;
use fdrs_core::svm::{
    build_dual_svm_qp, load_svm_file, synthetic_dataset, DEFAULT_BOX_UPPER, DEFAULT_KERNEL_SCALE, SYNTHETIC_FEATURES,
};
use fdrs_core::operators::SplitProblem;

use crate::config::Settings;
use crate::ProblemArgs;

pub const DEFAULT_DIM: usize = 20;
pub const DEFAULT_ROWS: usize = 2;
pub const DEFAULT_SAMPLES: usize = 200;

pub struct Built {
    pub spec: QpSpec,
    pub reduction: AffineReduction,
    pub betas: BetaEstimate,
}

impl Built {
    pub fn problem(&self) -> &SplitProblem {
        &self.reduction.problem
    }
}

pub fn build(args: &ProblemArgs, s: &mut Settings) -> Result<Built> {
    let svm_file = s.get_opt::<PathBuf>("svm_file", args.svm_file.clone())?;
    let default_source = if svm_file.is_some() { "svm" } else { "random" };
    let source = s.get("qp", args.qp.clone(), default_source.to_string())?;
    let spec = match source.as_str() {
        "random" => {
            let dim = s.get("dim", args.dim, DEFAULT_DIM)?;
            let rows = s.get("rows", args.rows, DEFAULT_ROWS)?;
            let seed = s.get("seed", args.seed, DEFAULT_PROBLEM_SEED)?;
            random_qp(dim, rows, seed)?
        }
        "svm" | "synthetic-svm" => {
            let ds = if source == "svm" {
                let Some(path) = &svm_file else {
                    bail!("--qp svm needs --svm-file");
                };
                load_svm_file(path).with_context(|| format!("loading {}", path.display()))?
            } else {
                let n = s.get("samples", args.samples, DEFAULT_SAMPLES)?;
                let seed = s.get("seed", args.seed, DEFAULT_PROBLEM_SEED)?;
                synthetic_dataset(n, SYNTHETIC_FEATURES, seed)
            };
            let scale = s.get("kernel_scale", args.kernel_scale, DEFAULT_KERNEL_SCALE)?;
            let upper = s.get("box_upper", args.box_upper, DEFAULT_BOX_UPPER)?;
            let linear = s.get("linear", args.linear, -1.0)?;
            build_dual_svm_qp(&ds, scale, upper, Some(Vector::repeat(ds.len(), linear)))?
        }
        other => bail!("unknown --qp `{other}` (expected random, svm or synthetic-svm)"),
    };
    let seed = s.get("spectral_seed", args.spectral_seed, DEFAULT_SEED)?;
    let tol = s.get("spectral_tol", args.spectral_tol, DEFAULT_TOL)?;
    let mut reduction = spec.reduce()?;
    let betas = estimate_betas_seeded(&spec.q, reduction.problem.subspace(), tol, DEFAULT_MAX_ITER, seed)?;
    if betas.beta_v.is_finite() {
        reduction.problem = reduction.problem.with_beta_v(betas.beta_v)?;
    }
    Ok(Built { spec, reduction, betas })
}

/// Explicit `gamma`, or the one picked by the gamma mode.
pub fn pick_gamma(p: &SplitProblem, gamma: Option<f64>, mode: Option<String>, s: &mut Settings) -> Result<f64> {
    let mode_name = s.get("gamma_mode", mode, "conservative".to_string())?;
    let mode = match mode_name.as_str() {
        "conservative" => GammaMode::Conservative,
        "aggressive" => GammaMode::Aggressive,
        other => bail!("unknown --gamma-mode `{other}` (expected conservative or aggressive)"),
    };
    match s.get_opt("gamma", gamma)? {
        Some(g) => Ok(g),
        None if p.beta_v().is_finite() => Ok(default_gamma(p, mode)),
        None => bail!("beta_V is unbounded for this problem; pass --gamma"),
    }
}
