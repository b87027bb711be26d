//! Retraction-free optimization on the generalized Stiefel manifold
//! `St_B(p, n) = {X ∈ ℝⁿˣᵖ : XᵀBX = I_p}`.
//!
//! The landing iteration follows `Λ(X) = Ψ(X) + ω∇N(X)`, the sum of a relative
//! ascent direction tangent to every level set of `h(X) = XᵀBX − I` and the
//! gradient of the infeasibility penalty `N(X) = ½‖h(X)‖²`. Neither term needs
//! a retraction or a factorization of `B`, and both stay unbiased when `B` and
//! `∇f` are replaced by independent minibatch estimates.
//!
//! Modules:
//! - [`manifold`]: constraint residual, penalty, retractions, multipliers, merit.
//! - [`landing`]: deterministic and stochastic landing fields, step-size safeguard.
//! - [`optimize`]: landing and Riemannian gradient drivers with metric traces.
//! - [`problems`]: GEVP, CCA and ICA objectives with exact-solution oracles.
//! - [`data`]: synthetic generators, MNIST loading, minibatch streams.

pub mod data;
pub mod error;
pub mod landing;
pub mod linalg;
pub mod manifold;
pub mod optimize;
pub mod problems;

#[cfg(test)]
pub(crate) mod testutil;

pub use error::{Error, Result};
pub use linalg::{CovarianceEstimate, Mat, SymmetricOperator};
pub use manifold::SpdMatrix;
