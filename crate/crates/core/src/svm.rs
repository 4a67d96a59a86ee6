//! Sparse `label idx:val ...` datasets and the RBF dual SVM quadratic program.

use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{FdrsError, Result};
use crate::linalg::{Matrix, Vector};
use crate::qp::QpSpec;

pub const DEFAULT_KERNEL_SCALE: f64 = 0.125;
pub const DEFAULT_BOX_UPPER: f64 = 10.0;

/// A sparse feature vector: `(index, value)` pairs, 1-based, strictly increasing.
pub type SparseRow = Vec<(usize, f64)>;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SvmDataset {
    pub samples: Vec<SparseRow>,
    /// Each label is `-1.0` or `1.0`.
    pub labels: Vec<f64>,
    /// Largest feature index seen.
    pub dim: usize,
}

impl SvmDataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn push(&mut self, label: f64, row: SparseRow) -> Result<()> {
        if label != 1.0 && label != -1.0 {
            return Err(FdrsError::InvalidParameter(format!("label {label} is not +1 or -1")));
        }
        if row.windows(2).any(|w| w[0].0 >= w[1].0) || row.first().is_some_and(|e| e.0 == 0) {
            return Err(FdrsError::InvalidParameter("indices must be 1-based and increasing".into()));
        }
        self.dim = self.dim.max(row.last().map_or(0, |e| e.0));
        self.samples.push(row);
        self.labels.push(label);
        Ok(())
    }
}

fn parse_line(line: &str, lineno: usize) -> Result<Option<(f64, SparseRow)>> {
    let err = |message: String| FdrsError::Parse { line: lineno, message };
    let content = line.split('#').next().unwrap_or("").trim();
    if content.is_empty() {
        return Ok(None);
    }
    let mut tokens = content.split_whitespace();
    let label_tok = tokens.next().expect("non-empty line has a token");
    let label: f64 = label_tok.parse().map_err(|_| err(format!("bad label `{label_tok}`")))?;
    if label != 1.0 && label != -1.0 {
        return Err(err(format!("label `{label_tok}` is not +1 or -1")));
    }
    let mut row = SparseRow::new();
    for tok in tokens {
        let (i, v) = tok.split_once(':').ok_or_else(|| err(format!("expected idx:val, got `{tok}`")))?;
        let i: usize = i.parse().map_err(|_| err(format!("bad index in `{tok}`")))?;
        let v: f64 = v.parse().map_err(|_| err(format!("bad value in `{tok}`")))?;
        if i == 0 {
            return Err(err("indices are 1-based".into()));
        }
        if row.last().is_some_and(|(prev, _)| *prev >= i) {
            return Err(err(format!("index {i} is not increasing")));
        }
        if !v.is_finite() {
            return Err(err(format!("non-finite value in `{tok}`")));
        }
        row.push((i, v));
    }
    Ok(Some((label, row)))
}

/// Parses the sparse text format. Blank lines and `#` comments are skipped.
pub fn parse_svm<R: Read>(input: R) -> Result<SvmDataset> {
    let mut ds = SvmDataset::default();
    for (n, line) in BufReader::new(input).lines().enumerate() {
        if let Some((label, row)) = parse_line(&line?, n + 1)? {
            ds.push(label, row)?;
        }
    }
    Ok(ds)
}

pub fn load_svm_file(path: impl AsRef<Path>) -> Result<SvmDataset> {
    parse_svm(std::fs::File::open(path)?)
}

/// Writes the dataset with round-trip float formatting.
pub fn write_svm<W: Write>(ds: &SvmDataset, mut out: W) -> Result<()> {
    let mut line = String::new();
    for (label, row) in ds.labels.iter().zip(&ds.samples) {
        line.clear();
        line.push_str(if *label > 0.0 { "+1" } else { "-1" });
        for (i, v) in row {
            write!(line, " {i}:{v:?}").expect("writing to a String");
        }
        writeln!(out, "{line}")?;
    }
    Ok(())
}

fn sparse_dist_sq(a: &[(usize, f64)], b: &[(usize, f64)]) -> f64 {
    let (mut i, mut j, mut acc) = (0, 0, 0.0);
    while i < a.len() || j < b.len() {
        let d = match (a.get(i), b.get(j)) {
            (Some(&(ia, va)), Some(&(ib, vb))) if ia == ib => {
                i += 1;
                j += 1;
                va - vb
            }
            (Some(&(ia, va)), Some(&(ib, _))) if ia < ib => {
                i += 1;
                va
            }
            (Some(&(_, va)), None) => {
                i += 1;
                va
            }
            (_, Some(&(_, vb))) => {
                j += 1;
                vb
            }
            (None, None) => unreachable!(),
        };
        acc += d * d;
    }
    acc
}

/// `Q_ij = y_i y_j exp(-kernel_scale ||x_i - x_j||^2)`, box `[0, box_upper]`,
/// `A = y'`, `b = 0`, and `c = linear` or `-1` by default. Rows are filled in
/// parallel; each entry depends only on its two samples.
pub fn build_dual_svm_qp(
    ds: &SvmDataset,
    kernel_scale: f64,
    box_upper: f64,
    linear: Option<Vector>,
) -> Result<QpSpec> {
    let n = ds.len();
    if n == 0 {
        return Err(FdrsError::InvalidParameter("empty dataset".into()));
    }
    if !(kernel_scale > 0.0 && box_upper > 0.0) {
        return Err(FdrsError::InvalidParameter("kernel scale and box bound must be positive".into()));
    }
    let c = linear.unwrap_or_else(|| Vector::repeat(n, -1.0));
    crate::error::check_dim(n, c.len())?;
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            (0..n)
                .map(|j| {
                    let k = (-kernel_scale * sparse_dist_sq(&ds.samples[i], &ds.samples[j])).exp();
                    ds.labels[i] * ds.labels[j] * k
                })
                .collect()
        })
        .collect();
    let q = Matrix::from_fn(n, n, |i, j| rows[i][j]);
    let y = Vector::from_column_slice(&ds.labels);
    Ok(QpSpec {
        q,
        c,
        lower: Vector::zeros(n),
        upper: Vector::repeat(n, box_upper),
        a: Matrix::from_row_slice(1, n, y.as_slice()),
        b: Vector::zeros(1),
    })
}

/// Two overlapping Gaussian classes centred at `+-shift` in every coordinate
/// with standard deviation `spread`, a stand-in for real data when none is
/// supplied. Tight, overlapping clouds make the kernel matrix close to rank
/// one, which is the regime where `beta_V` is much larger than `beta`.
pub fn synthetic_dataset(samples: usize, features: usize, seed: u64) -> SvmDataset {
    synthetic_dataset_with(samples, features, SYNTHETIC_SHIFT, SYNTHETIC_SPREAD, seed)
}

pub const SYNTHETIC_FEATURES: usize = 4;
pub const SYNTHETIC_SHIFT: f64 = 0.15;
pub const SYNTHETIC_SPREAD: f64 = 0.3;

pub fn synthetic_dataset_with(samples: usize, features: usize, shift: f64, spread: f64, seed: u64) -> SvmDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ds = SvmDataset::default();
    for _ in 0..samples {
        let label = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        let row = (1..=features)
            .map(|i| (i, shift * label + spread * rng.sample::<f64, _>(StandardNormal)))
            .collect();
        ds.push(label, row).expect("generated rows are well formed");
    }
    ds
}
