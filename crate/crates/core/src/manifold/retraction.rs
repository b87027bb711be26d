use std::fmt;
use std::str::FromStr;

use nalgebra::Cholesky;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    check_shape, sorted_symmetric_eigen, spectral_map, sym, Mat, SymmetricOperator,
};

const RANK_TOL: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RetractionKind {
    /// `Y (YᵀBY)^{-1/2}` with `Y = X + Z`.
    Polar,
    /// `U Vᵀ` from the B-orthogonal SVD `Y = U Σ Vᵀ`.
    Svd,
    /// `Y R⁻¹` with `RᵀR = YᵀBY` the Cholesky factorization.
    CholeskyQr,
}

impl FromStr for RetractionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "polar" => Ok(Self::Polar),
            "svd" => Ok(Self::Svd),
            "cholesky_qr" | "cholqr" => Ok(Self::CholeskyQr),
            other => Err(Error::invalid(format!("unknown retraction kind `{other}`"))),
        }
    }
}

impl fmt::Display for RetractionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Polar => "polar",
            Self::Svd => "svd",
            Self::CholeskyQr => "cholesky_qr",
        })
    }
}

/// Map `X + Z` back onto `{Y : YᵀBY = I}`.
pub fn retract<B: SymmetricOperator + ?Sized>(
    x: &Mat,
    z: &Mat,
    b: &B,
    kind: RetractionKind,
) -> Result<Mat> {
    check_shape("retract", x, b.dim(), x.ncols())?;
    check_shape("retract", z, x.nrows(), x.ncols())?;
    let y = x + z;
    let gram = sym(&y.tr_mul(&b.apply(&y)));
    let failure = || Error::RetractionFailure { kind };
    if !gram.iter().all(|v| v.is_finite()) {
        return Err(failure());
    }

    match kind {
        RetractionKind::Polar => {
            let (vals, vecs) = sorted_symmetric_eigen(&gram);
            check_rank(&vals).ok_or_else(failure)?;
            Ok(&y * spectral_map(&vals, &vecs, |d| 1.0 / d.sqrt()))
        }
        RetractionKind::Svd => {
            // YᵀBY = V Σ² Vᵀ, so U = Y V Σ⁻¹ has B-orthonormal columns.
            let (vals, v) = sorted_symmetric_eigen(&gram);
            check_rank(&vals).ok_or_else(failure)?;
            let mut u = &y * &v;
            for (j, d) in vals.iter().enumerate() {
                u.column_mut(j).scale_mut(1.0 / d.sqrt());
            }
            Ok(u * v.transpose())
        }
        RetractionKind::CholeskyQr => {
            let max_diag = gram.diagonal().max();
            let chol = Cholesky::new(gram).ok_or_else(failure)?;
            let l = chol.l();
            let min_pivot = l.diagonal().min();
            if !(min_pivot * min_pivot > RANK_TOL * max_diag) {
                return Err(failure());
            }
            // Y R⁻¹ = (L⁻¹ Yᵀ)ᵀ with R = Lᵀ.
            let solved = l
                .solve_lower_triangular(&y.transpose())
                .ok_or_else(failure)?;
            Ok(solved.transpose())
        }
    }
}

fn check_rank(descending: &[f64]) -> Option<()> {
    let max = descending[0];
    let min = *descending.last()?;
    (max > 0.0 && min > RANK_TOL * max).then_some(())
}
