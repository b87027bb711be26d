//! Objectives over one or more generalized Stiefel blocks, with exact oracles.

mod amari;
mod cca;
mod gevp;
mod ica;

pub use amari::amari_distance;
pub use cca::{CcaProblem, CcaSample, CcaSampler, CcaSolution};
pub use gevp::{GevpGaussianSampler, GevpProblem, GevpSolution};
pub use ica::{log_cosh, IcaProblem, IcaSampler};

use crate::error::Result;
use crate::linalg::Mat;
use crate::manifold::SpdMatrix;

/// A smooth objective on a product of generalized Stiefel manifolds, one
/// constraint matrix per block.
pub trait Problem: Sync {
    fn name(&self) -> &'static str;

    fn num_blocks(&self) -> usize;

    fn constraint(&self, block: usize) -> &SpdMatrix;

    fn value_grad(&self, xs: &[Mat]) -> Result<(f64, Vec<Mat>)>;

    /// Problem-specific score recorded alongside the objective.
    fn extra(&self, _xs: &[Mat]) -> Option<f64> {
        None
    }

    /// Samples per pass through the data, for stochastic problems.
    fn n_samples(&self) -> Option<usize> {
        None
    }
}

pub(crate) fn single<'a>(op: &'static str, xs: &'a [Mat]) -> Result<&'a Mat> {
    match xs {
        [x] => Ok(x),
        _ => Err(crate::Error::invalid(format!(
            "{op} expects one block, got {}",
            xs.len()
        ))),
    }
}
