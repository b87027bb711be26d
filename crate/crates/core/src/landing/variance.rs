use serde::Serialize;

use crate::error::{Error, Result};

/// Inputs of the variance bound on the stochastic landing field.
///
/// `sigma_g2 = E‖∇f_ξ − ∇f‖²`, `sigma_b2 = E‖B_ζ − B‖²`, `p_b = E‖B_ζ‖₂²`,
/// and `delta` bounds `‖∇f(X)Xᵀ‖₂²` over the safe region.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VarianceInputs {
    pub sigma_g2: f64,
    pub sigma_b2: f64,
    pub omega: f64,
    pub epsilon: f64,
    pub beta_1: f64,
    pub beta_n: f64,
    pub p_b: f64,
    pub delta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VarianceBound {
    pub alpha_g: f64,
    pub alpha_b: f64,
    pub gamma_b: f64,
    /// `σ_G² α_G + σ_B² (α_B + ω² γ_B)`, a bound on `E‖Λ_{ξ,ζ,ζ'} − Λ‖²`.
    pub total: f64,
}

pub fn variance_bound(v: &VarianceInputs) -> Result<VarianceBound> {
    let fields = [
        v.sigma_g2, v.sigma_b2, v.omega, v.epsilon, v.beta_1, v.beta_n, v.p_b, v.delta,
    ];
    if fields.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
        return Err(Error::invalid(
            "variance bound inputs must be finite and nonnegative",
        ));
    }
    if !(v.beta_n > 0.0) {
        return Err(Error::invalid("beta_n must be positive"));
    }
    let r = (1.0 + v.epsilon) / v.beta_n;
    let alpha_g = 8.0 * v.p_b * v.p_b * r * r;
    let alpha_b = 8.0 * r * v.delta * (v.p_b + v.beta_1 * v.beta_1);
    let gamma_b =
        8.0 * r * (r * v.sigma_b2 + v.epsilon * v.epsilon + v.beta_1 * v.beta_1 * r.powi(3));
    let total = v.sigma_g2 * alpha_g + v.sigma_b2 * (alpha_b + v.omega * v.omega * gamma_b);
    Ok(VarianceBound {
        alpha_g,
        alpha_b,
        gamma_b,
        total,
    })
}
