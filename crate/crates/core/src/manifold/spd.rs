use std::fmt;
use std::sync::{Arc, OnceLock};

use nalgebra::{Cholesky, Dyn};

use crate::error::{Error, Result};
use crate::linalg::{
    check_square, sorted_symmetric_eigen, sym, CovarianceEstimate, Mat, SymmetricOperator,
};
use crate::manifold::{smoothness_constants, SmoothnessConstants};

const SYMMETRY_TOL: f64 = 1e-12;

/// A symmetric positive-definite constraint matrix `B`.
///
/// Positive definiteness is established by a successful Cholesky factorization
/// at construction. The extreme eigenvalues are only needed by diagnostics and
/// are computed on first request.
#[derive(Clone)]
pub struct SpdMatrix {
    mat: Arc<Mat>,
    chol: Cholesky<f64, Dyn>,
    extremes: OnceLock<(f64, f64)>,
}

impl SpdMatrix {
    pub fn new(m: Mat) -> Result<Self> {
        check_square("SpdMatrix::new", &m)?;
        let scale = m.norm().max(f64::MIN_POSITIVE);
        let asym = (&m - m.transpose()).norm() / scale;
        if asym > SYMMETRY_TOL {
            return Err(Error::NotSymmetric(asym));
        }
        let m = sym(&m);
        let chol = Cholesky::new(m.clone()).ok_or(Error::NotPositiveDefinite)?;
        if (0..m.nrows()).any(|i| chol.l_dirty()[(i, i)] <= 0.0) {
            return Err(Error::NotPositiveDefinite);
        }
        Ok(SpdMatrix {
            mat: Arc::new(m),
            chol,
            extremes: OnceLock::new(),
        })
    }

    pub fn identity(n: usize) -> Self {
        Self::new(Mat::identity(n, n)).expect("identity is SPD")
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &Mat {
        &self.mat
    }

    pub fn shared(&self) -> Arc<Mat> {
        Arc::clone(&self.mat)
    }

    /// Lower-triangular `L` with `B = L Lᵀ`.
    pub fn cholesky_factor(&self) -> Mat {
        self.chol.l()
    }

    /// `B⁻¹ · rhs`.
    pub fn solve(&self, rhs: &Mat) -> Mat {
        self.chol.solve(rhs)
    }

    /// `(β₁, β_n)`: the largest and smallest eigenvalues.
    pub fn extreme_eigenvalues(&self) -> (f64, f64) {
        *self.extremes.get_or_init(|| {
            let (vals, _) = sorted_symmetric_eigen(&self.mat);
            (vals[0], *vals.last().unwrap())
        })
    }

    pub fn condition_number(&self) -> f64 {
        let (b1, bn) = self.extreme_eigenvalues();
        b1 / bn
    }

    pub fn smoothness_constants(&self, epsilon: f64) -> Result<SmoothnessConstants> {
        let (b1, bn) = self.extreme_eigenvalues();
        smoothness_constants(b1, bn, epsilon)
    }

    pub fn as_estimate(&self) -> CovarianceEstimate {
        CovarianceEstimate::Dense(self.shared())
    }
}

impl SymmetricOperator for SpdMatrix {
    fn dim(&self) -> usize {
        self.mat.nrows()
    }

    fn apply(&self, x: &Mat) -> Mat {
        &*self.mat * x
    }
}

impl fmt::Debug for SpdMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SpdMatrix")
            .field("dim", &self.dim())
            .field("extremes", &self.extremes.get())
            .finish()
    }
}
