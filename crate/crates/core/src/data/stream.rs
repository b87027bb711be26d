use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Index sets for one stochastic landing step: the gradient batch `ξ` and two
/// independent constraint batches `ζ`, `ζ'`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BatchTriple {
    pub gradient: Vec<usize>,
    pub zeta: Vec<usize>,
    pub zeta_prime: Vec<usize>,
}

/// Uniform with-replacement minibatches over `0..n_samples`.
#[derive(Debug, Clone)]
pub struct BatchStream {
    n_samples: usize,
    batch: usize,
    rng: ChaCha8Rng,
}

impl BatchStream {
    pub fn new(n_samples: usize, batch: usize, seed: u64) -> Result<Self> {
        if n_samples == 0 || batch == 0 {
            return Err(Error::invalid(
                "batch stream needs a nonempty source and batch size",
            ));
        }
        if batch > n_samples {
            return Err(Error::invalid(format!(
                "batch size {batch} exceeds the number of samples {n_samples}"
            )));
        }
        Ok(Self {
            n_samples,
            batch,
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    pub fn batch_size(&self) -> usize {
        self.batch
    }

    /// Steps per pass through the data, rounded up.
    pub fn steps_per_epoch(&self) -> usize {
        self.n_samples.div_ceil(self.batch)
    }

    pub fn next_batch(&mut self) -> Vec<usize> {
        (0..self.batch)
            .map(|_| self.rng.random_range(0..self.n_samples))
            .collect()
    }

    pub fn next_triple(&mut self) -> BatchTriple {
        BatchTriple {
            gradient: self.next_batch(),
            zeta: self.next_batch(),
            zeta_prime: self.next_batch(),
        }
    }
}
