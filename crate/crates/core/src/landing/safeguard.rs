use crate::error::{Error, Result};
use crate::manifold::SmoothnessConstants;

pub const DEFAULT_SAFEGUARD_ALPHA: f64 = 0.5;

/// Largest step keeping the segment `x − tΛ(x)`, `t ∈ [0, η]`, inside `‖h‖ ≤ ε`.
///
/// It is the positive root of `N(x) − ηω‖∇N‖² + ½η²L_N‖Λ‖² = ½ε²`.
pub fn step_size_safeguard(
    norm_grad_n: f64,
    norm_lambda: f64,
    norm_h: f64,
    l_n: f64,
    omega: f64,
    epsilon: f64,
) -> Result<f64> {
    if norm_lambda == 0.0 {
        return Err(Error::FieldVanished);
    }
    if norm_h > epsilon {
        return Err(Error::OutsideSafeRegion {
            h_norm: norm_h,
            epsilon,
        });
    }
    if !(l_n > 0.0 && omega > 0.0) {
        return Err(Error::invalid("safeguard needs positive L_N and omega"));
    }
    let g2 = norm_grad_n * norm_grad_n;
    let lam2 = norm_lambda * norm_lambda;
    let slack = (epsilon * epsilon - norm_h * norm_h).max(0.0);
    let disc = (omega * omega * g2 * g2 + l_n * lam2 * slack).sqrt();
    Ok((omega * g2 + disc) / (l_n * lam2))
}

/// The four candidate bounds whose minimum bounds the safeguard from below.
pub fn safeguard_lower_bound_terms(
    c: &SmoothnessConstants,
    c_psi: f64,
    omega: f64,
    alpha: f64,
) -> Result<[f64; 4]> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid(format!(
            "alpha must lie in (0, 1), got {alpha}"
        )));
    }
    if !(c_psi > 0.0 && omega > 0.0) {
        return Err(Error::invalid("c_psi and omega must be positive"));
    }
    let eps = c.epsilon;
    let l = c.l_n;
    let denom = c_psi * c_psi + omega * omega * c.c_h * c.c_h * eps * eps;
    let root = (2.0 * l).sqrt();
    Ok([
        omega * c.c_h_lower * c.c_h_lower * alpha * alpha * eps * eps / (l * denom),
        (1.0 - alpha) * eps / root,
        (1.0 - alpha) * eps / (root * denom),
        (c.c_h_lower / c.c_h).powi(2) / (omega * l),
    ])
}

pub fn safeguard_lower_bound(
    c: &SmoothnessConstants,
    c_psi: f64,
    omega: f64,
    alpha: f64,
) -> Result<f64> {
    let terms = safeguard_lower_bound_terms(c, c_psi, omega, alpha)?;
    Ok(terms.into_iter().fold(f64::INFINITY, f64::min))
}
