//! `fdrs`: solve, certify and inspect FDRS runs from the command line.
//!
//! Exit status is 0 on success, 2 when a certificate or bound check fails and
//! 1 on usage or I/O errors.

mod commands;
mod config;
mod problem;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "fdrs", version, about = "Relaxed forward-Douglas-Rachford splitting solver and rate certificates")]
pub struct Cli {
    /// Plain-text `key = value` file; flags override its entries.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory (default: $FDRS_OUT_DIR, then `fdrs-out`).
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Run FDRS on a QP and write the trace.
    Solve(SolveArgs),
    /// Run FDRS, then check every applicable rate certificate.
    Certify(CertifyArgs),
    /// Run one of the lower-bound constructions.
    Counterexample {
        #[command(subcommand)]
        which: CounterexampleCmd,
    },
    /// Compare FDRS with the primal-dual recursion it is equivalent to.
    PdCompare(PdArgs),
    /// Estimate 1/beta, 1/beta_V and their ratio.
    Spectral(ProblemArgs),
}

#[derive(Args, Debug, Clone, Default)]
pub struct ProblemArgs {
    /// Problem source: `random`, `svm` (needs --svm-file) or `synthetic-svm`.
    #[arg(long)]
    pub qp: Option<String>,
    #[arg(long)]
    pub dim: Option<usize>,
    /// Equality constraints in a random QP.
    #[arg(long)]
    pub rows: Option<usize>,
    /// Problem generation seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Sparse `label idx:val ...` file for the dual SVM.
    #[arg(long)]
    pub svm_file: Option<PathBuf>,
    /// Sample count for `synthetic-svm`.
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub kernel_scale: Option<f64>,
    #[arg(long)]
    pub box_upper: Option<f64>,
    /// Constant entry of the dual SVM linear term.
    #[arg(long, allow_hyphen_values = true)]
    pub linear: Option<f64>,
    #[arg(long)]
    pub spectral_seed: Option<u64>,
    #[arg(long)]
    pub spectral_tol: Option<f64>,
}

#[derive(Args, Debug, Clone, Default)]
pub struct RunArgs {
    /// Explicit step size; overrides --gamma-mode.
    #[arg(long)]
    pub gamma: Option<f64>,
    /// `conservative` (beta_V) or `aggressive` (1.99 beta_V).
    #[arg(long)]
    pub gamma_mode: Option<String>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    /// Stop once ||Tz - z||^2 falls below this; negative runs all iterations.
    #[arg(long, allow_hyphen_values = true)]
    pub fpr_tol: Option<f64>,
    #[arg(long)]
    pub record_every: Option<usize>,
    /// Also write `k<TAB>value` series for the FPR and objective error.
    #[arg(long)]
    pub emit_plot_data: bool,
}

#[derive(Args, Debug, Clone)]
pub struct SolveArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[command(flatten)]
    pub run: RunArgs,
}

#[derive(Args, Debug, Clone)]
pub struct CertifyArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[command(flatten)]
    pub run: RunArgs,
    /// Lipschitz constant of f near the solution, enabling that check.
    #[arg(long)]
    pub lipschitz: Option<f64>,
    /// Young parameter c > 1/2 for the linear-rate check.
    #[arg(long)]
    pub linear_c: Option<f64>,
}

#[derive(Subcommand, Debug, Clone)]
pub enum CounterexampleCmd {
    /// Rotation family whose iterates decay exactly like (k+1)^(-alpha).
    Sublinear {
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        a: Option<f64>,
        #[arg(long)]
        blocks: Option<usize>,
        #[arg(long)]
        k: Option<usize>,
    },
    /// Instance slower than F(t) = (t + 2)^(-exponent).
    Slow {
        #[arg(long)]
        exponent: Option<f64>,
        #[arg(long)]
        a: Option<f64>,
        #[arg(long)]
        k_max: Option<usize>,
        #[arg(long)]
        eta: Option<f64>,
    },
}

#[derive(Args, Debug, Clone)]
pub struct PdArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub gamma_mode: Option<String>,
    #[arg(long)]
    pub iters: Option<usize>,
    /// Allowed deviation between the two sequences.
    #[arg(long)]
    pub tol: Option<f64>,
}

/// Outcome of a command that ran to completion.
pub enum Status {
    Ok,
    CheckFailed,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match commands::dispatch(cli) {
        Ok(Status::Ok) => ExitCode::SUCCESS,
        Ok(Status::CheckFailed) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
