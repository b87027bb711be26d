//! Geometry of the generalized Stiefel manifold `St_B(p, n) = {X : XᵀBX = I_p}`.
//!
//! Everything here is defined on the whole ambient space, not only on the
//! manifold: the constraint residual `h(X) = XᵀBX − I_p`, the penalty
//! `N(X) = ½‖h(X)‖²`, the least-squares multipliers, and the metric
//! projections all make sense for any full-rank `X`. The landing iteration
//! lives in the safe region `‖h(X)‖ ≤ ε` around the manifold.

mod constants;
mod multiplier;
mod retraction;
mod spd;

pub use constants::{singular_value_bounds, smoothness_constants, SmoothnessConstants};
pub(crate) use multiplier::merit_terms;
pub use multiplier::{fletcher_merit, lagrange_multiplier, riemannian_gradient};
pub use retraction::{retract, RetractionKind};
pub use spd::SpdMatrix;

use nalgebra::Cholesky;

use crate::error::{Error, Result};
use crate::linalg::{check_shape, inner, sym, Mat, SymmetricOperator};

/// `h(X) = XᵀBX − I_p`, symmetrized, together with its Frobenius norm.
#[derive(Debug, Clone)]
pub struct ConstraintResidual {
    pub h: Mat,
    pub frobenius_norm: f64,
}

pub fn constraint_residual<B: SymmetricOperator + ?Sized>(
    x: &Mat,
    b: &B,
) -> Result<ConstraintResidual> {
    check_shape("constraint_residual", x, b.dim(), x.ncols())?;
    Ok(residual_from_bx(x, &b.apply(x)))
}

pub(crate) fn residual_from_bx(x: &Mat, bx: &Mat) -> ConstraintResidual {
    let p = x.ncols();
    let h = sym(&x.tr_mul(bx)) - Mat::identity(p, p);
    let frobenius_norm = h.norm();
    ConstraintResidual { h, frobenius_norm }
}

/// `(N(X), ∇N(X))` with `N(X) = ½‖XᵀBX − I‖²` and `∇N(X) = 2BX(XᵀBX − I)`.
pub fn penalty_and_gradient<B: SymmetricOperator + ?Sized>(x: &Mat, b: &B) -> Result<(f64, Mat)> {
    check_shape("penalty_and_gradient", x, b.dim(), x.ncols())?;
    let bx = b.apply(x);
    let res = residual_from_bx(x, &bx);
    let grad = bx * &res.h * 2.0;
    Ok((0.5 * res.frobenius_norm * res.frobenius_norm, grad))
}

fn gram_factor<B: SymmetricOperator + ?Sized>(
    x: &Mat,
    b: &B,
) -> Result<(Mat, Cholesky<f64, nalgebra::Dyn>)> {
    let bx = b.apply(x);
    let gram = sym(&x.tr_mul(&bx));
    let chol = Cholesky::new(gram).ok_or(Error::SingularGram)?;
    Ok((bx, chol))
}

/// Normal component `X (XᵀBX)⁻¹ sym(XᵀBY)` for the metric that makes the
/// generalized Stiefel manifold isometric to the canonical Stiefel manifold.
pub fn normal_project<B: SymmetricOperator + ?Sized>(x: &Mat, y: &Mat, b: &B) -> Result<Mat> {
    check_shape("normal_project", x, b.dim(), x.ncols())?;
    check_shape("normal_project", y, x.nrows(), x.ncols())?;
    let (bx, chol) = gram_factor(x, b)?;
    let s = sym(&bx.tr_mul(y));
    Ok(x * chol.solve(&s))
}

/// Tangent component `Y − X (XᵀBX)⁻¹ sym(XᵀBY)`.
pub fn tangent_project<B: SymmetricOperator + ?Sized>(x: &Mat, y: &Mat, b: &B) -> Result<Mat> {
    Ok(y - normal_project(x, y, b)?)
}

/// Metric `g_X(ξ, ζ) = ⟨ξ, (B − ½BX(XᵀBX)⁻¹XᵀB) ζ (XᵀBX)⁻¹⟩`.
pub fn metric_inner<B: SymmetricOperator + ?Sized>(
    x: &Mat,
    xi: &Mat,
    zeta: &Mat,
    b: &B,
) -> Result<f64> {
    check_shape("metric_inner", x, b.dim(), x.ncols())?;
    check_shape("metric_inner", xi, x.nrows(), x.ncols())?;
    check_shape("metric_inner", zeta, x.nrows(), x.ncols())?;
    let (bx, chol) = gram_factor(x, b)?;
    let inner_op = b.apply(zeta) - &bx * chol.solve(&bx.tr_mul(zeta)) * 0.5;
    // (·) (XᵀBX)⁻¹ on the right; the Gram matrix is symmetric.
    let right = chol.solve(&inner_op.transpose()).transpose();
    Ok(inner(xi, &right))
}
