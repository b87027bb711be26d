//! Instance generators, MNIST ingestion and minibatch index streams.

mod mnist;
mod stream;

pub use mnist::{load_mnist_split, parse_idx_images, split_halves, IdxImages, IDX_IMAGE_MAGIC};
pub use stream::{BatchStream, BatchTriple};

use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{sym, Mat};
use crate::manifold::SpdMatrix;
use crate::problems::{CcaProblem, IcaProblem};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectrumKind {
    /// Linearly spaced from 1 down to 1/κ, both endpoints included.
    Equidistant,
    /// Geometric from 1 down to 1/κ.
    Exponential,
}

impl FromStr for SpectrumKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "equidistant" => Ok(Self::Equidistant),
            "exponential" => Ok(Self::Exponential),
            other => Err(Error::invalid(format!("unknown spectrum kind `{other}`"))),
        }
    }
}

impl fmt::Display for SpectrumKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Equidistant => "equidistant",
            Self::Exponential => "exponential",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumSpec {
    pub kind: SpectrumKind,
    pub kappa: f64,
    pub n: usize,
}

impl SpectrumSpec {
    pub fn new(kind: SpectrumKind, kappa: f64, n: usize) -> Result<Self> {
        if !(kappa >= 1.0 && kappa.is_finite()) {
            return Err(Error::invalid(format!("kappa must be >= 1, got {kappa}")));
        }
        if n == 0 {
            return Err(Error::invalid("spectrum dimension must be positive"));
        }
        Ok(Self { kind, kappa, n })
    }

    /// Eigenvalues in descending order, from 1 down to 1/κ.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let n = self.n;
        if n == 1 {
            return vec![1.0];
        }
        let last = (n - 1) as f64;
        (0..n)
            .map(|i| {
                let t = i as f64 / last;
                match self.kind {
                    SpectrumKind::Equidistant => 1.0 - t * (1.0 - 1.0 / self.kappa),
                    SpectrumKind::Exponential => self.kappa.powf(-t),
                }
            })
            .collect()
    }
}

pub fn gaussian_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Mat {
    Mat::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
}

/// Haar-distributed orthogonal matrix: QR of a Gaussian matrix with the signs
/// of `diag(R)` folded into `Q`.
pub fn random_orthogonal<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Mat {
    let qr = gaussian_matrix(n, n, rng).qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

fn with_spectrum(q: &Mat, eigenvalues: &[f64]) -> Mat {
    let d = DVector::from_column_slice(eigenvalues);
    sym(&(q * Mat::from_diagonal(&d) * q.transpose()))
}

/// `(A, B)` with prescribed spectra and independent Haar eigenbases.
pub fn gen_spd_pair(
    spec_a: &SpectrumSpec,
    spec_b: &SpectrumSpec,
    seed: u64,
) -> Result<(Mat, SpdMatrix)> {
    if spec_a.n != spec_b.n {
        return Err(Error::invalid(format!(
            "spectra must share the dimension, got {} and {}",
            spec_a.n, spec_b.n
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let qa = random_orthogonal(spec_a.n, &mut rng);
    let qb = random_orthogonal(spec_b.n, &mut rng);
    let a = with_spectrum(&qa, &spec_a.eigenvalues());
    let b = SpdMatrix::new(with_spectrum(&qb, &spec_b.eigenvalues()))?;
    Ok((a, b))
}

/// Standard Laplace draw as the difference of two unit exponentials.
fn laplace<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let a: f64 = Exp1.sample(rng);
    let b: f64 = Exp1.sample(rng);
    a - b
}

/// Mixed signals `A = S Wᵀ` with Laplace(0, 1) sources `S` (N×n) and a Haar
/// orthogonal `W`, kept for scoring.
pub fn gen_ica_dataset(n: usize, samples: usize, seed: u64) -> Result<IcaProblem> {
    if samples < n || n == 0 {
        return Err(Error::invalid(format!(
            "need N >= n > 0, got N = {samples}, n = {n}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = random_orthogonal(n, &mut rng);
    let s = Mat::from_fn(samples, n, |_, _| laplace(&mut rng));
    IcaProblem::new(s * w.transpose(), Some(w))
}

/// Two views sharing a `latent`-dimensional Gaussian signal, one sample per
/// column.
///
/// Each view is `d = Q S z + R D e`: orthonormal loadings `Q` with signal
/// strengths `S` decaying linearly from 2.5 to 1, and independent noise whose
/// standard deviations are spread evenly over `[0.5, 1]` in a random basis
/// `R`. The top `latent` canonical correlations are then well separated from
/// the rest.
pub fn gen_cca_dataset(
    n: usize,
    samples: usize,
    latent: usize,
    seed: u64,
    ridge: Option<f64>,
) -> Result<CcaProblem> {
    if latent == 0 || latent > n || samples < 2 {
        return Err(Error::invalid(format!(
            "need 0 < latent <= n and N >= 2, got latent = {latent}, n = {n}, N = {samples}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let strength = |j: usize| {
        if latent == 1 {
            2.5
        } else {
            2.5 - 1.5 * j as f64 / (latent - 1) as f64
        }
    };
    let noise_sd = |i: usize| {
        if n == 1 {
            1.0
        } else {
            1.0 - 0.5 * i as f64 / (n - 1) as f64
        }
    };
    let view = |rng: &mut ChaCha8Rng| {
        let mut load = random_orthogonal(n, rng).columns(0, latent).into_owned();
        for j in 0..latent {
            load.column_mut(j).scale_mut(strength(j));
        }
        let mut mix = random_orthogonal(n, rng);
        for i in 0..n {
            mix.column_mut(i).scale_mut(noise_sd(i));
        }
        (load, mix)
    };
    let (l1, e1) = view(&mut rng);
    let (l2, e2) = view(&mut rng);
    let z = gaussian_matrix(latent, samples, &mut rng);
    let d1 = &l1 * &z + &e1 * gaussian_matrix(n, samples, &mut rng);
    let d2 = &l2 * &z + &e2 * gaussian_matrix(n, samples, &mut rng);
    CcaProblem::new(d1, d2, ridge)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::sorted_symmetric_eigen;

    #[test]
    fn spectra_endpoints() {
        let e = SpectrumSpec::new(SpectrumKind::Equidistant, 10.0, 4)
            .unwrap()
            .eigenvalues();
        assert_eq!(e[0], 1.0);
        assert!((e[3] - 0.1).abs() < 1e-15);
        assert!((e[1] - e[2] - (e[2] - e[3])).abs() < 1e-15);
        let x = SpectrumSpec::new(SpectrumKind::Exponential, 100.0, 3)
            .unwrap()
            .eigenvalues();
        assert!((x[1] - 0.1).abs() < 1e-15 && (x[2] - 0.01).abs() < 1e-15);
        assert!(SpectrumSpec::new(SpectrumKind::Exponential, 0.5, 3).is_err());
    }

    #[test]
    fn generated_spectra_are_exact() {
        let sa = SpectrumSpec::new(SpectrumKind::Equidistant, 10.0, 12).unwrap();
        let sb = SpectrumSpec::new(SpectrumKind::Exponential, 50.0, 12).unwrap();
        let (a, b) = gen_spd_pair(&sa, &sb, 7).unwrap();
        for (m, spec) in [(&a, sa), (b.matrix(), sb)] {
            let (vals, _) = sorted_symmetric_eigen(m);
            for (got, want) in vals.iter().zip(spec.eigenvalues()) {
                assert!((got - want).abs() < 1e-10);
            }
        }
        let (a2, b2) = gen_spd_pair(&sa, &sb, 7).unwrap();
        assert_eq!(a, a2);
        assert_eq!(b.matrix(), b2.matrix());
        let (a3, _) = gen_spd_pair(&sa, &sb, 8).unwrap();
        assert_ne!(a, a3);
    }

    #[test]
    fn unit_condition_number_gives_identity() {
        let s = SpectrumSpec::new(SpectrumKind::Exponential, 1.0, 5).unwrap();
        let (a, b) = gen_spd_pair(&s, &s, 1).unwrap();
        assert!((a - Mat::identity(5, 5)).amax() < 1e-14);
        assert!((b.matrix() - Mat::identity(5, 5)).amax() < 1e-14);
    }

    #[test]
    fn orthogonal_is_orthogonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let q = random_orthogonal(6, &mut rng);
        assert!((q.tr_mul(&q) - Mat::identity(6, 6)).amax() < 1e-13);
    }

    #[test]
    fn ica_dataset_is_reproducible() {
        let p1 = gen_ica_dataset(4, 500, 3).unwrap();
        let p2 = gen_ica_dataset(4, 500, 3).unwrap();
        assert_eq!(p1.data(), p2.data());
        assert!(gen_ica_dataset(5, 4, 0).is_err());
    }

    #[test]
    fn cca_dataset_separates_shared_directions() {
        let p = gen_cca_dataset(8, 20_000, 3, 5, Some(0.0)).unwrap();
        let c = p.oracle(3).unwrap().correlations;
        // Population correlations are s²/(s² + σ²) ≥ 1/2 for the shared
        // directions and 0 otherwise; sampling error is O(sqrt(n/N)).
        assert!(c[2] > 0.45, "{c:?}");
        assert!(c[3] < 0.1, "{c:?}");
        let q = gen_cca_dataset(8, 20_000, 3, 5, Some(0.0)).unwrap();
        assert_eq!(p.views().0, q.views().0);
    }

    #[test]
    fn ica_covariance_is_near_twice_identity() {
        let n = 4;
        let big_n = 100_000;
        let p = gen_ica_dataset(n, big_n, 11).unwrap();
        let dev = (p.constraint().matrix() - Mat::identity(n, n) * 2.0).amax();
        // Entrywise standard error is about sqrt(Var(s²)/N) = sqrt(20/N) on the
        // diagonal; allow five of them.
        assert!(dev < 5.0 * (20.0 / big_n as f64).sqrt(), "deviation {dev}");
    }
}
