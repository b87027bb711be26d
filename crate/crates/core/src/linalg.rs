//! Small dense helpers shared by the geometry and the optimizers.

use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

pub type Mat = DMatrix<f64>;

/// `(A + Aᵀ) / 2` for a square matrix.
pub fn sym(a: &Mat) -> Mat {
    (a + a.transpose()) * 0.5
}

/// `(A − Aᵀ) / 2` for a square matrix.
pub fn skew(a: &Mat) -> Mat {
    (a - a.transpose()) * 0.5
}

/// Frobenius inner product `tr(AᵀB)`.
pub fn inner(a: &Mat, b: &Mat) -> f64 {
    a.dot(b)
}

pub(crate) fn check_shape(op: &'static str, m: &Mat, rows: usize, cols: usize) -> Result<()> {
    if m.nrows() != rows || m.ncols() != cols {
        return Err(Error::DimensionMismatch {
            op,
            expected: (rows, cols),
            found: (m.nrows(), m.ncols()),
        });
    }
    Ok(())
}

pub(crate) fn check_square(op: &'static str, m: &Mat) -> Result<()> {
    check_shape(op, m, m.nrows(), m.nrows())
}

/// Symmetric eigendecomposition with eigenvalues sorted in descending order.
pub fn sorted_symmetric_eigen(m: &Mat) -> (Vec<f64>, Mat) {
    let eig = SymmetricEigen::new(m.clone());
    let mut order: Vec<usize> = (0..m.nrows()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = Mat::from_fn(m.nrows(), m.ncols(), |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

/// `V · diag(g(d)) · Vᵀ` for a symmetric matrix `Q diag(d) Qᵀ`.
pub(crate) fn spectral_map(values: &[f64], vectors: &Mat, g: impl Fn(f64) -> f64) -> Mat {
    let mut scaled = vectors.clone();
    for (j, &d) in values.iter().enumerate() {
        let s = g(d);
        scaled.column_mut(j).scale_mut(s);
    }
    let out = scaled * vectors.transpose();
    sym(&out)
}

/// Anything that acts as a symmetric n×n matrix on n×p blocks.
///
/// The geometry only ever needs products `B·X`, which lets minibatch
/// covariances stay in factored form.
pub trait SymmetricOperator {
    fn dim(&self) -> usize;
    fn apply(&self, x: &Mat) -> Mat;
}

impl SymmetricOperator for Mat {
    fn dim(&self) -> usize {
        self.nrows()
    }

    fn apply(&self, x: &Mat) -> Mat {
        self * x
    }
}

/// A (possibly rank-deficient) PSD estimate of the constraint matrix.
#[derive(Debug, Clone)]
pub enum CovarianceEstimate {
    Dense(Arc<Mat>),
    /// `scale · V Vᵀ + shift · I` with `V` of shape n×r.
    Factored {
        factor: Mat,
        scale: f64,
        shift: f64,
    },
}

impl CovarianceEstimate {
    /// `V Vᵀ / r` for an n×r sample matrix `V`.
    pub fn from_samples(factor: Mat) -> Self {
        let r = factor.ncols().max(1) as f64;
        CovarianceEstimate::Factored {
            factor,
            scale: 1.0 / r,
            shift: 0.0,
        }
    }

    pub fn with_shift(self, extra: f64) -> Self {
        match self {
            CovarianceEstimate::Dense(m) => {
                let mut d = (*m).clone();
                for i in 0..d.nrows() {
                    d[(i, i)] += extra;
                }
                CovarianceEstimate::Dense(Arc::new(d))
            }
            CovarianceEstimate::Factored {
                factor,
                scale,
                shift,
            } => CovarianceEstimate::Factored {
                factor,
                scale,
                shift: shift + extra,
            },
        }
    }

    pub fn to_dense(&self) -> Mat {
        match self {
            CovarianceEstimate::Dense(m) => (**m).clone(),
            CovarianceEstimate::Factored {
                factor,
                scale,
                shift,
            } => {
                let mut d = factor * factor.transpose() * *scale;
                for i in 0..d.nrows() {
                    d[(i, i)] += shift;
                }
                d
            }
        }
    }
}

impl SymmetricOperator for CovarianceEstimate {
    fn dim(&self) -> usize {
        match self {
            CovarianceEstimate::Dense(m) => m.nrows(),
            CovarianceEstimate::Factored { factor, .. } => factor.nrows(),
        }
    }

    fn apply(&self, x: &Mat) -> Mat {
        match self {
            CovarianceEstimate::Dense(m) => &**m * x,
            CovarianceEstimate::Factored {
                factor,
                scale,
                shift,
            } => {
                let mut out = factor * factor.tr_mul(x) * *scale;
                if *shift != 0.0 {
                    out += x * *shift;
                }
                out
            }
        }
    }
}
