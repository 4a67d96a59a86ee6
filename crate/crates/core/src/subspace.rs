//! Closed linear subspaces with exact orthogonal projectors.

use nalgebra::{Matrix2, SVD};

use crate::error::{check_dim, FdrsError, Result};
use crate::functions::FunctionDescriptor;
use crate::linalg::{Matrix, Vector};
use crate::operators::SplitProblem;

/// Singular values below this fraction of the largest are treated as zero.
pub const RANK_CUTOFF: f64 = 1e-12;

#[derive(Clone, Debug)]
enum Repr {
    /// `null(A)`; `row_basis` is an orthonormal basis of `range(A^T)`.
    NullSpace { row_basis: Matrix },
    Span { basis: Matrix },
    DiagonalOfProduct { copies: usize, base_dim: usize },
    /// Per 2-d block, the line through `(cos, sin)`.
    BlockRotation { cos: Vec<f64>, sin: Vec<f64> },
    /// Per 2-d block, the first coordinate axis.
    BlockAxis { blocks: usize },
}

#[derive(Clone, Debug)]
pub struct Subspace {
    dim: usize,
    repr: Repr,
}

impl Subspace {
    /// `null(A)` for an `m x d` matrix `A`, of any rank.
    pub fn null_space(a: &Matrix) -> Self {
        let d = a.ncols();
        Self {
            dim: d,
            repr: Repr::NullSpace {
                row_basis: range_basis(&a.transpose()),
            },
        }
    }

    /// The whole ambient space.
    pub fn whole(dim: usize) -> Self {
        Self {
            dim,
            repr: Repr::NullSpace {
                row_basis: Matrix::zeros(dim, 0),
            },
        }
    }

    /// Column span of a column-orthonormal `B`.
    pub fn span(basis: Matrix) -> Result<Self> {
        let r = basis.ncols();
        let gram_err = (basis.transpose() * &basis - Matrix::identity(r, r)).amax();
        if gram_err > 1e-12 {
            return Err(FdrsError::InvalidParameter(format!(
                "span basis is not orthonormal (error {gram_err:e})"
            )));
        }
        Ok(Self {
            dim: basis.nrows(),
            repr: Repr::Span { basis },
        })
    }

    /// Column span of an arbitrary `B`, orthonormalized first.
    pub fn span_of(b: &Matrix) -> Self {
        Self {
            dim: b.nrows(),
            repr: Repr::Span {
                basis: range_basis(b),
            },
        }
    }

    /// `{(x, ..., x)}` in the product of `copies` copies of `R^base_dim`.
    pub fn diagonal_of_product(copies: usize, base_dim: usize) -> Result<Self> {
        if copies == 0 {
            return Err(FdrsError::InvalidParameter("need at least one copy".into()));
        }
        Ok(Self {
            dim: copies * base_dim,
            repr: Repr::DiagonalOfProduct { copies, base_dim },
        })
    }

    /// Block `i` spans `(cos theta_i, sin theta_i)`, `theta_i` in `(0, pi/2]`.
    pub fn block_rotation_from_angles(angles: &[f64]) -> Result<Self> {
        if let Some(t) = angles
            .iter()
            .find(|t| !(**t > 0.0 && **t <= std::f64::consts::FRAC_PI_2))
        {
            return Err(FdrsError::InvalidParameter(format!(
                "rotation angle {t} outside (0, pi/2]"
            )));
        }
        Ok(Self {
            dim: 2 * angles.len(),
            repr: Repr::BlockRotation {
                cos: angles.iter().map(|t| t.cos().max(0.0)).collect(),
                sin: angles.iter().map(|t| t.sin()).collect(),
            },
        })
    }

    /// Block `i` spans `(c_i, sqrt(1 - c_i^2))`, `c_i` in `[0, 1)`.
    pub fn block_rotation_from_cosines(cosines: &[f64]) -> Result<Self> {
        if let Some(c) = cosines.iter().find(|c| !(**c >= 0.0 && **c < 1.0)) {
            return Err(FdrsError::InvalidParameter(format!(
                "rotation cosine {c} outside [0, 1)"
            )));
        }
        Ok(Self {
            dim: 2 * cosines.len(),
            repr: Repr::BlockRotation {
                cos: cosines.to_vec(),
                sin: cosines.iter().map(|c| (1.0 - c * c).sqrt()).collect(),
            },
        })
    }

    /// `R e_0 + R e_0 + ...` over `blocks` 2-d blocks.
    pub fn block_axis(blocks: usize) -> Self {
        Self {
            dim: 2 * blocks,
            repr: Repr::BlockAxis { blocks },
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Dimension of the subspace itself.
    pub fn rank(&self) -> usize {
        match &self.repr {
            Repr::NullSpace { row_basis } => self.dim - row_basis.ncols(),
            Repr::Span { basis } => basis.ncols(),
            Repr::DiagonalOfProduct { base_dim, .. } => *base_dim,
            Repr::BlockRotation { cos, .. } => cos.len(),
            Repr::BlockAxis { blocks } => *blocks,
        }
    }

    pub fn is_whole_space(&self) -> bool {
        self.rank() == self.dim
    }

    pub fn project(&self, x: &Vector) -> Result<Vector> {
        check_dim(self.dim, x.len())?;
        Ok(match &self.repr {
            Repr::NullSpace { row_basis } => {
                if row_basis.ncols() == 0 {
                    x.clone()
                } else {
                    x - row_basis * row_basis.tr_mul(x)
                }
            }
            Repr::Span { basis } => basis * basis.tr_mul(x),
            Repr::DiagonalOfProduct { copies, base_dim } => {
                let mut mean = Vector::zeros(*base_dim);
                for j in 0..*copies {
                    mean += x.rows(j * base_dim, *base_dim);
                }
                mean /= *copies as f64;
                Vector::from_fn(self.dim, |i, _| mean[i % base_dim])
            }
            Repr::BlockRotation { cos, sin } => {
                let mut out = Vector::zeros(self.dim);
                for (i, (c, s)) in cos.iter().zip(sin.iter()).enumerate() {
                    let t = c * x[2 * i] + s * x[2 * i + 1];
                    out[2 * i] = c * t;
                    out[2 * i + 1] = s * t;
                }
                out
            }
            Repr::BlockAxis { blocks } => {
                let mut out = Vector::zeros(self.dim);
                for i in 0..*blocks {
                    out[2 * i] = x[2 * i];
                }
                out
            }
        })
    }

    pub fn project_complement(&self, x: &Vector) -> Result<Vector> {
        Ok(x - self.project(x)?)
    }

    /// `2 P_V x - x`.
    pub fn reflect(&self, x: &Vector) -> Result<Vector> {
        Ok(self.project(x)? * 2.0 - x)
    }

    /// The `(cos, sin)` pairs of a block-rotation subspace.
    pub fn rotation_blocks(&self) -> Option<(&[f64], &[f64])> {
        match &self.repr {
            Repr::BlockRotation { cos, sin } => Some((cos, sin)),
            _ => None,
        }
    }
}

/// Orthonormal basis of `range(M)` from a thin SVD with relative cutoff.
fn range_basis(m: &Matrix) -> Matrix {
    let (rows, cols) = m.shape();
    if rows == 0 || cols == 0 || m.amax() == 0.0 {
        return Matrix::zeros(rows, 0);
    }
    let svd = SVD::new(m.clone(), true, false);
    let u = svd.u.expect("left singular vectors requested");
    let smax = svd.singular_values.max();
    let keep: Vec<usize> = svd
        .singular_values
        .iter()
        .enumerate()
        .filter(|(_, s)| **s > RANK_CUTOFF * smax)
        .map(|(i, _)| i)
        .collect();
    Matrix::from_fn(rows, keep.len(), |i, j| u[(i, keep[j])])
}

/// Projector onto `R e_theta` in `R^2`.
pub fn rotation_projector_block(theta: f64) -> Matrix2<f64> {
    let (s, c) = theta.sin_cos();
    Matrix2::new(c * c, s * c, s * c, s * s)
}

/// Reduction of `min f + g` over `{Ax = b}` to a problem over `null(A)`.
#[derive(Clone, Debug)]
pub struct AffineReduction {
    pub problem: SplitProblem,
    pub shift: Vector,
}

impl AffineReduction {
    /// Maps a solution of the reduced problem back to the original variable.
    pub fn recover(&self, x: &Vector) -> Vector {
        x + &self.shift
    }
}

/// Shifts `f` and `g` by the minimal-norm solution `x_p = A^T (A A^T)^+ b`
/// and returns the problem over `null(A)`.
pub fn affine_reduction(
    f: &FunctionDescriptor,
    g: &FunctionDescriptor,
    a: &Matrix,
    b: &Vector,
) -> Result<AffineReduction> {
    let d = a.ncols();
    check_dim(a.nrows(), b.len())?;
    check_dim(d, f.dim())?;
    check_dim(d, g.dim())?;
    let shift = if b.iter().all(|v| *v == 0.0) || a.nrows() == 0 {
        Vector::zeros(d)
    } else {
        let svd = SVD::new(a.clone(), true, true);
        let eps = RANK_CUTOFF * svd.singular_values.max();
        svd.solve(b, eps).map_err(|e| FdrsError::Factorization(e.to_string()))?
    };
    let residual = (a * &shift - b).norm();
    if residual > 1e-9 * (1.0 + b.norm()) {
        return Err(FdrsError::Infeasible { residual });
    }
    let problem = SplitProblem::new(f.shifted(&shift)?, g.shifted(&shift)?, Subspace::null_space(a))?;
    Ok(AffineReduction { problem, shift })
}
