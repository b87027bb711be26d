use serde::Serialize;

use crate::error::{Error, Result};

/// Closed-form constants of the constraint `h(X) = XᵀBX − I` on the safe region
/// `‖h(X)‖ ≤ ε`.
///
/// `c_h` and `c_h_lower` bound the singular values of `Dh(X)* : S ↦ 2BXS`, so
/// that `c_h_lower ‖h‖ ≤ ‖∇N‖ ≤ c_h ‖h‖`. `l_n` is the Lipschitz constant of
/// `∇N`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SmoothnessConstants {
    pub c_h: f64,
    pub c_h_lower: f64,
    pub l_n: f64,
    pub epsilon: f64,
}

pub fn smoothness_constants(beta_1: f64, beta_n: f64, epsilon: f64) -> Result<SmoothnessConstants> {
    if !(beta_n > 0.0 && beta_n <= beta_1 && beta_1.is_finite()) {
        return Err(Error::invalid(format!(
            "need 0 < beta_n <= beta_1, got beta_1 = {beta_1}, beta_n = {beta_n}"
        )));
    }
    if !(0.0..1.0).contains(&epsilon) {
        return Err(Error::invalid(format!(
            "need 0 <= epsilon < 1, got {epsilon}"
        )));
    }
    let kappa = beta_1 / beta_n;
    Ok(SmoothnessConstants {
        c_h: 2.0 * ((1.0 + epsilon) * beta_1 * kappa).sqrt(),
        c_h_lower: 2.0 * ((1.0 - epsilon) * beta_n / kappa).sqrt(),
        l_n: 2.0 * beta_1 * (epsilon + 2.0 * (1.0 + epsilon) * kappa),
        epsilon,
    })
}

/// Interval containing every singular value of a point in the safe region.
pub fn singular_value_bounds(beta_1: f64, beta_n: f64, epsilon: f64) -> (f64, f64) {
    (
        ((1.0 - epsilon) / beta_1).sqrt(),
        ((1.0 + epsilon) / beta_n).sqrt(),
    )
}
