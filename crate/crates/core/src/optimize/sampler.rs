use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::linalg::{CovarianceEstimate, Mat};
use crate::problems::Problem;

/// One independent draw `(G_ξ, B_ζ, B_ζ')`, one entry per block.
#[derive(Debug, Clone)]
pub struct StochasticDraw {
    pub grads: Vec<Mat>,
    pub b_zeta: Vec<CovarianceEstimate>,
    pub b_zeta_prime: Vec<CovarianceEstimate>,
}

impl StochasticDraw {
    pub(crate) fn check(&self, blocks: usize) -> Result<()> {
        if self.grads.len() != blocks
            || self.b_zeta.len() != blocks
            || self.b_zeta_prime.len() != blocks
        {
            return Err(Error::invalid(format!(
                "sampler returned a draw for the wrong number of blocks (expected {blocks})"
            )));
        }
        Ok(())
    }
}

/// Source of stochastic landing inputs. Each sampler owns its random stream.
pub trait Sampler {
    fn draw(&mut self, xs: &[Mat]) -> Result<StochasticDraw>;

    fn steps_per_epoch(&self) -> Option<usize> {
        None
    }
}

/// Zero-variance sampler: full gradients and the exact constraint matrices.
pub struct ExactSampler<'a> {
    problem: &'a dyn Problem,
}

impl<'a> ExactSampler<'a> {
    pub fn new(problem: &'a dyn Problem) -> Self {
        Self { problem }
    }
}

impl Sampler for ExactSampler<'_> {
    fn draw(&mut self, xs: &[Mat]) -> Result<StochasticDraw> {
        let (_, grads) = self.problem.value_grad(xs)?;
        let b: Vec<CovarianceEstimate> = (0..self.problem.num_blocks())
            .map(|i| self.problem.constraint(i).as_estimate())
            .collect();
        Ok(StochasticDraw {
            grads,
            b_zeta: b.clone(),
            b_zeta_prime: b,
        })
    }
}

/// Replays a finite list of draws, then reports exhaustion.
#[derive(Debug, Clone, Default)]
pub struct RecordedSampler {
    draws: VecDeque<StochasticDraw>,
}

impl RecordedSampler {
    pub fn new(draws: impl IntoIterator<Item = StochasticDraw>) -> Self {
        Self {
            draws: draws.into_iter().collect(),
        }
    }

    pub fn remaining(&self) -> usize {
        self.draws.len()
    }
}

impl Sampler for RecordedSampler {
    fn draw(&mut self, _xs: &[Mat]) -> Result<StochasticDraw> {
        self.draws.pop_front().ok_or(Error::SamplerExhausted)
    }
}
