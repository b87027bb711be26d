use crate::error::{Error, Result};
use crate::linalg::{check_shape, inner, sorted_symmetric_eigen, sym, Mat, SymmetricOperator};
use crate::manifold::residual_from_bx;

const SINGULAR_TOL: f64 = 1e-14;

/// Least-squares multipliers `λ(X) = (Dh(X)*)† ∇f(X)`.
///
/// Solves `2λS + 2Sλ = XᵀBG + GᵀBX` with `S = XᵀB²X` in the eigenbasis of `S`.
pub fn lagrange_multiplier<B: SymmetricOperator + ?Sized>(x: &Mat, g: &Mat, b: &B) -> Result<Mat> {
    check_shape("lagrange_multiplier", x, b.dim(), x.ncols())?;
    check_shape("lagrange_multiplier", g, x.nrows(), x.ncols())?;
    let bx = b.apply(x);
    multiplier_from_bx(&bx, g)
}

pub(crate) fn multiplier_from_bx(bx: &Mat, g: &Mat) -> Result<Mat> {
    let s = sym(&bx.tr_mul(bx));
    let c = bx.tr_mul(g);
    let rhs = &c + c.transpose();
    let (d, q) = sorted_symmetric_eigen(&s);
    let (dmax, dmin) = (d[0], *d.last().unwrap());
    if !(dmin > SINGULAR_TOL * dmax.max(f64::MIN_POSITIVE)) {
        return Err(Error::SingularMultiplierSystem(dmin));
    }
    let mut rot = q.tr_mul(&rhs) * &q;
    for i in 0..d.len() {
        for j in 0..d.len() {
            rot[(i, j)] /= 2.0 * (d[i] + d[j]);
        }
    }
    Ok(sym(&(&q * rot * q.transpose())))
}

/// `∇f − 2BXλ(X)`: the Euclidean gradient with its normal component removed.
pub fn riemannian_gradient<B: SymmetricOperator + ?Sized>(x: &Mat, g: &Mat, b: &B) -> Result<Mat> {
    check_shape("riemannian_gradient", x, b.dim(), x.ncols())?;
    check_shape("riemannian_gradient", g, x.nrows(), x.ncols())?;
    let bx = b.apply(x);
    let lambda = multiplier_from_bx(&bx, g)?;
    Ok(g - bx * lambda * 2.0)
}

/// Fletcher's augmented Lagrangian `f − ⟨h(X), λ(X)⟩ + β‖h(X)‖²`.
pub fn fletcher_merit<B: SymmetricOperator + ?Sized>(
    x: &Mat,
    f_val: f64,
    g: &Mat,
    b: &B,
    beta: f64,
) -> Result<f64> {
    check_shape("fletcher_merit", x, b.dim(), x.ncols())?;
    check_shape("fletcher_merit", g, x.nrows(), x.ncols())?;
    if !(beta > 0.0) {
        return Err(Error::invalid(format!(
            "merit beta must be positive, got {beta}"
        )));
    }
    let bx = b.apply(x);
    Ok(merit_terms(x, &bx, g)?.value(f_val, beta))
}

/// The β-independent pieces of the merit: `⟨h, λ⟩` and `‖h‖²`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct MeritTerms {
    pub coupling: f64,
    pub h_sq: f64,
}

impl MeritTerms {
    pub fn value(&self, f_val: f64, beta: f64) -> f64 {
        f_val - self.coupling + beta * self.h_sq
    }
}

pub(crate) fn merit_terms(x: &Mat, bx: &Mat, g: &Mat) -> Result<MeritTerms> {
    let h = residual_from_bx(x, bx);
    let lambda = multiplier_from_bx(bx, g)?;
    Ok(MeritTerms {
        coupling: inner(&h.h, &lambda),
        h_sq: h.frobenius_norm * h.frobenius_norm,
    })
}
