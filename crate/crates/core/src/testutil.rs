use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::linalg::Mat;
use crate::manifold::SpdMatrix;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(r: usize, c: usize, rng: &mut ChaCha8Rng) -> Mat {
    Mat::from_fn(r, c, |_, _| StandardNormal.sample(rng))
}

/// Random SPD matrix with geometric spectrum from 1 down to 1/kappa.
pub fn random_spd(n: usize, kappa: f64, seed: u64) -> SpdMatrix {
    let mut r = rng(seed ^ 0x5eed);
    let q = gaussian(n, n, &mut r).qr().q();
    let d = DVector::from_fn(n, |i, _| kappa.powf(-(i as f64) / (n.max(2) - 1) as f64));
    let m = &q * Mat::from_diagonal(&d) * q.transpose();
    SpdMatrix::new(crate::linalg::sym(&m)).unwrap()
}
