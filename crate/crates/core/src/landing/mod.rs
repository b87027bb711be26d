//! The landing field `Λ(X) = Ψ(X) + ω∇N(X)` and its stochastic estimator.
//!
//! Both relative ascent directions are written as products of n×p and p×p
//! intermediates only:
//!
//! ```text
//! Ψ_B(X)   = 2 skew(∇f Xᵀ B) B X        = G (UᵀV) − U (GᵀV),   U = V = BX
//! Ψ_B^R(X) = 2 skew(B⁻¹∇f Xᵀ) B X       = W (XᵀBX) − X (WᵀBX), W = B⁻¹G
//! ```
//!
//! The stochastic field uses `U = B_ζ X` and `V = B_ζ' X` from two independent
//! draws of the constraint matrix, which keeps it unbiased.

mod safeguard;
mod variance;

pub use safeguard::{
    safeguard_lower_bound, safeguard_lower_bound_terms, step_size_safeguard,
    DEFAULT_SAFEGUARD_ALPHA,
};
pub use variance::{variance_bound, VarianceBound, VarianceInputs};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{check_shape, Mat, SymmetricOperator};
use crate::manifold::{residual_from_bx, ConstraintResidual, SpdMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AscentVariant {
    /// `2 skew(∇f Xᵀ B) B X`; needs only products with `B`.
    PsiB,
    /// `2 skew(B⁻¹∇f Xᵀ) B X`; a Riemannian gradient, needs solves with `B`.
    PsiBRiemannian,
}

impl FromStr for AscentVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "psi_b" => Ok(Self::PsiB),
            "psi_b_riemannian" | "psi_br" => Ok(Self::PsiBRiemannian),
            other => Err(Error::invalid(format!("unknown ascent variant `{other}`"))),
        }
    }
}

impl fmt::Display for AscentVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::PsiB => "psi_b",
            Self::PsiBRiemannian => "psi_b_riemannian",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepKind {
    Constant,
    /// `η_k = η₀ (1 + k)^{-1/2}`.
    InverseSqrt,
}

impl FromStr for StepKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "constant" => Ok(Self::Constant),
            "inverse_sqrt" => Ok(Self::InverseSqrt),
            other => Err(Error::invalid(format!("unknown step schedule `{other}`"))),
        }
    }
}

impl fmt::Display for StepKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Constant => "constant",
            Self::InverseSqrt => "inverse_sqrt",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepSchedule {
    pub kind: StepKind,
    pub eta0: f64,
}

impl StepSchedule {
    pub fn new(kind: StepKind, eta0: f64) -> Result<Self> {
        if !(eta0 > 0.0 && eta0.is_finite()) {
            return Err(Error::invalid(format!("eta0 must be positive, got {eta0}")));
        }
        Ok(Self { kind, eta0 })
    }

    pub fn constant(eta0: f64) -> Result<Self> {
        Self::new(StepKind::Constant, eta0)
    }

    pub fn inverse_sqrt(eta0: f64) -> Result<Self> {
        Self::new(StepKind::InverseSqrt, eta0)
    }

    pub fn eta(&self, k: usize) -> f64 {
        match self.kind {
            StepKind::Constant => self.eta0,
            StepKind::InverseSqrt => self.eta0 / ((1 + k) as f64).sqrt(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LandingConfig {
    pub omega: f64,
    pub epsilon: f64,
    pub variant: AscentVariant,
    pub step: StepSchedule,
}

impl LandingConfig {
    pub fn new(
        omega: f64,
        epsilon: f64,
        variant: AscentVariant,
        step: StepSchedule,
    ) -> Result<Self> {
        if !(omega > 0.0 && omega.is_finite()) {
            return Err(Error::invalid(format!(
                "omega must be positive, got {omega}"
            )));
        }
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(Error::invalid(format!(
                "epsilon must lie in (0, 1), got {epsilon}"
            )));
        }
        StepSchedule::new(step.kind, step.eta0)?;
        Ok(Self {
            omega,
            epsilon,
            variant,
            step,
        })
    }
}

/// `G (UᵀV) − U (GᵀV)`, i.e. `2 skew(G Uᵀ) V` for symmetric `B_ζ`, `B_ζ'`.
fn psi_from_products(g: &Mat, u: &Mat, v: &Mat) -> Mat {
    g * u.tr_mul(v) - u * g.tr_mul(v)
}

fn relative_ascent_from_bx(
    x: &Mat,
    bx: &Mat,
    g: &Mat,
    b: &SpdMatrix,
    variant: AscentVariant,
) -> Mat {
    match variant {
        AscentVariant::PsiB => psi_from_products(g, bx, bx),
        AscentVariant::PsiBRiemannian => {
            let w = b.solve(g);
            &w * x.tr_mul(bx) - x * w.tr_mul(bx)
        }
    }
}

pub fn relative_ascent(x: &Mat, g: &Mat, b: &SpdMatrix, variant: AscentVariant) -> Result<Mat> {
    check_shape("relative_ascent", x, b.dim(), x.ncols())?;
    check_shape("relative_ascent", g, x.nrows(), x.ncols())?;
    let bx = b.apply(x);
    Ok(relative_ascent_from_bx(x, &bx, g, b, variant))
}

/// The two orthogonal pieces of the landing field at one point.
#[derive(Debug, Clone)]
pub struct LandingComponents {
    pub psi: Mat,
    pub grad_n: Mat,
    pub residual: ConstraintResidual,
    pub psi_norm: f64,
    pub grad_n_norm: f64,
}

impl LandingComponents {
    pub fn field(&self, omega: f64) -> Mat {
        combine(&self.psi, &self.grad_n, omega)
    }

    /// `‖Λ‖` from `‖Λ‖² = ‖Ψ‖² + ω²‖∇N‖²`.
    pub fn field_norm(&self, omega: f64) -> f64 {
        self.psi_norm.hypot(omega * self.grad_n_norm)
    }
}

fn combine(psi: &Mat, grad_n: &Mat, omega: f64) -> Mat {
    psi + grad_n * omega
}

pub fn landing_components(
    x: &Mat,
    g: &Mat,
    b: &SpdMatrix,
    variant: AscentVariant,
) -> Result<LandingComponents> {
    check_shape("landing_components", x, b.dim(), x.ncols())?;
    check_shape("landing_components", g, x.nrows(), x.ncols())?;
    let bx = b.apply(x);
    let psi = relative_ascent_from_bx(x, &bx, g, b, variant);
    let residual = residual_from_bx(x, &bx);
    let grad_n = bx * &residual.h * 2.0;
    Ok(LandingComponents {
        psi_norm: psi.norm(),
        grad_n_norm: grad_n.norm(),
        psi,
        grad_n,
        residual,
    })
}

/// `Λ(X) = Ψ(X) + ω∇N(X)`.
pub fn landing_field_deterministic(
    x: &Mat,
    g: &Mat,
    b: &SpdMatrix,
    config: &LandingConfig,
) -> Result<Mat> {
    Ok(landing_components(x, g, b, config.variant)?.field(config.omega))
}

/// `2 skew(G_ξ Xᵀ B_ζ) B_ζ' X + 2ω B_ζ' X (Xᵀ B_ζ X − I)`.
pub fn landing_field_stochastic<U, V>(
    x: &Mat,
    g_xi: &Mat,
    b_zeta: &U,
    b_zeta_prime: &V,
    omega: f64,
) -> Result<Mat>
where
    U: SymmetricOperator + ?Sized,
    V: SymmetricOperator + ?Sized,
{
    check_shape("landing_field_stochastic", x, b_zeta.dim(), x.ncols())?;
    check_shape("landing_field_stochastic", x, b_zeta_prime.dim(), x.ncols())?;
    check_shape("landing_field_stochastic", g_xi, x.nrows(), x.ncols())?;
    let u = b_zeta.apply(x);
    let v = b_zeta_prime.apply(x);
    let psi = psi_from_products(g_xi, &u, &v);
    let h = residual_from_bx(x, &u).h;
    let grad_n = v * h * 2.0;
    Ok(combine(&psi, &grad_n, omega))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{inner, skew, sym, CovarianceEstimate};
    use crate::manifold::{penalty_and_gradient, retract, RetractionKind};
    use crate::testutil::{gaussian, random_spd, rng};

    fn feasible(n: usize, p: usize, b: &SpdMatrix, seed: u64) -> Mat {
        let mut r = rng(seed);
        retract(
            &gaussian(n, p, &mut r),
            &Mat::zeros(n, p),
            b,
            RetractionKind::Polar,
        )
        .unwrap()
    }

    #[test]
    fn critical_point_gives_zero_psi() {
        let b = random_spd(6, 10.0, 1);
        let x = feasible(6, 2, &b, 2);
        let mut r = rng(3);
        let s = sym(&gaussian(2, 2, &mut r));
        let g = b.matrix() * &x * s;
        for variant in [AscentVariant::PsiB, AscentVariant::PsiBRiemannian] {
            let psi = relative_ascent(&x, &g, &b, variant).unwrap();
            assert!(psi.amax() < 1e-12 * g.amax().max(1.0), "{variant}");
        }
    }

    #[test]
    fn identity_reduces_to_stiefel_direction() {
        let b = SpdMatrix::identity(5);
        let mut r = rng(4);
        let x = gaussian(5, 2, &mut r);
        let g = gaussian(5, 2, &mut r);
        let psi = relative_ascent(&x, &g, &b, AscentVariant::PsiB).unwrap();
        let expected = skew(&(&g * x.transpose())) * &x * 2.0;
        assert!((psi - expected).amax() < 1e-12);
    }

    #[test]
    fn matches_dense_definition() {
        let b = random_spd(4, 5.0, 5);
        let mut r = rng(6);
        let x = gaussian(4, 2, &mut r);
        let g = gaussian(4, 2, &mut r);
        let bm = b.matrix();
        let psi_b = relative_ascent(&x, &g, &b, AscentVariant::PsiB).unwrap();
        let dense_b = skew(&(&g * x.transpose() * bm)) * bm * &x * 2.0;
        assert!((psi_b - dense_b).amax() < 1e-12);
        let binv = bm.clone().try_inverse().unwrap();
        let psi_r = relative_ascent(&x, &g, &b, AscentVariant::PsiBRiemannian).unwrap();
        let dense_r = skew(&(&binv * &g * x.transpose())) * bm * &x * 2.0;
        assert!((psi_r - dense_r).amax() < 1e-12);
    }

    #[test]
    fn psi_is_orthogonal_to_normal_space() {
        let b = random_spd(8, 20.0, 7);
        let mut r = rng(8);
        for _ in 0..20 {
            let x = gaussian(8, 3, &mut r);
            let g = gaussian(8, 3, &mut r);
            let s = sym(&gaussian(3, 3, &mut r));
            let normal = b.matrix() * &x * &s;
            for variant in [AscentVariant::PsiB, AscentVariant::PsiBRiemannian] {
                let psi = relative_ascent(&x, &g, &b, variant).unwrap();
                assert!(inner(&psi, &normal).abs() <= 1e-10 * psi.norm() * normal.norm());
            }
        }
    }

    #[test]
    fn deterministic_field_pieces() {
        let b = random_spd(6, 10.0, 9);
        let cfg = LandingConfig::new(
            2.5,
            0.5,
            AscentVariant::PsiB,
            StepSchedule::constant(0.1).unwrap(),
        )
        .unwrap();
        let x = feasible(6, 2, &b, 10);
        let mut r = rng(11);
        let g = gaussian(6, 2, &mut r);
        let lam = landing_field_deterministic(&x, &g, &b, &cfg).unwrap();
        let psi = relative_ascent(&x, &g, &b, cfg.variant).unwrap();
        assert!((&lam - &psi).amax() < 1e-13);

        let xi = &x * 1.1 + gaussian(6, 2, &mut r) * 0.05;
        let zero = landing_field_deterministic(&xi, &Mat::zeros(6, 2), &b, &cfg).unwrap();
        let (_, grad_n) = penalty_and_gradient(&xi, &b).unwrap();
        assert!((zero - &grad_n * cfg.omega).amax() < 1e-13);

        let comps = landing_components(&xi, &g, &b, cfg.variant).unwrap();
        let full = landing_field_deterministic(&xi, &g, &b, &cfg).unwrap();
        let pyth = comps.field_norm(cfg.omega);
        assert!((full.norm() - pyth).abs() <= 1e-10 * pyth);
        assert!(
            inner(&comps.psi, &comps.grad_n).abs() <= 1e-10 * comps.psi_norm * comps.grad_n_norm
        );
    }

    #[test]
    fn stochastic_with_exact_inputs_is_deterministic() {
        let b = random_spd(5, 4.0, 12);
        let mut r = rng(13);
        let x = gaussian(5, 2, &mut r);
        let g = gaussian(5, 2, &mut r);
        let cfg = LandingConfig::new(
            0.7,
            0.5,
            AscentVariant::PsiB,
            StepSchedule::constant(1.0).unwrap(),
        )
        .unwrap();
        let det = landing_field_deterministic(&x, &g, &b, &cfg).unwrap();
        let sto = landing_field_stochastic(&x, &g, &b, &b.as_estimate(), cfg.omega).unwrap();
        assert_eq!(det, sto);
    }

    #[test]
    fn rank_one_estimate_matches_dense_oracle() {
        let mut r = rng(14);
        let x = gaussian(6, 2, &mut r);
        let g = gaussian(6, 2, &mut r);
        let v = gaussian(6, 1, &mut r);
        let w = gaussian(6, 2, &mut r);
        let bz = CovarianceEstimate::from_samples(v.clone());
        let bzp = CovarianceEstimate::from_samples(w.clone());
        let out = landing_field_stochastic(&x, &g, &bz, &bzp, 1.5).unwrap();
        let bz_d = &v * v.transpose();
        let bzp_d = &w * w.transpose() / 2.0;
        let p = Mat::identity(2, 2);
        let expected = skew(&(&g * x.transpose() * &bz_d)) * &bzp_d * &x * 2.0
            + &bzp_d * &x * (x.transpose() * &bz_d * &x - p) * 3.0;
        assert!((out - expected).amax() < 1e-12);
    }

    #[test]
    fn schedule_and_config_validation() {
        let s = StepSchedule::inverse_sqrt(2.0).unwrap();
        assert_eq!(s.eta(0), 2.0);
        assert!((s.eta(3) - 1.0).abs() < 1e-15);
        assert!(StepSchedule::constant(0.0).is_err());
        let step = StepSchedule::constant(1.0).unwrap();
        assert!(LandingConfig::new(0.0, 0.5, AscentVariant::PsiB, step).is_err());
        assert!(LandingConfig::new(1.0, 1.0, AscentVariant::PsiB, step).is_err());
        assert_eq!(
            "psi_b_riemannian".parse::<AscentVariant>().unwrap(),
            AscentVariant::PsiBRiemannian
        );
    }
}
