use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::gaussian_matrix;
use crate::error::{Error, Result};
use crate::linalg::{
    check_shape, check_square, sorted_symmetric_eigen, sym, CovarianceEstimate, Mat,
};
use crate::manifold::SpdMatrix;
use crate::optimize::{Sampler, StochasticDraw};
use crate::problems::{single, Problem};

const SYMMETRY_TOL: f64 = 1e-12;

/// `min −½ tr(XᵀAX)` subject to `XᵀBX = I`.
#[derive(Debug, Clone)]
pub struct GevpProblem {
    a: Mat,
    b: SpdMatrix,
}

#[derive(Debug, Clone)]
pub struct GevpSolution {
    pub optimum: f64,
    /// B-orthonormal top-p generalized eigenvectors.
    pub minimizer: Mat,
    /// All generalized eigenvalues, descending.
    pub eigenvalues: Vec<f64>,
}

impl GevpProblem {
    pub fn new(a: Mat, b: SpdMatrix) -> Result<Self> {
        check_square("GevpProblem::new", &a)?;
        check_shape("GevpProblem::new", &a, b.dim(), b.dim())?;
        let asym = (&a - a.transpose()).norm() / a.norm().max(f64::MIN_POSITIVE);
        if asym > SYMMETRY_TOL {
            return Err(Error::NotSymmetric(asym));
        }
        Ok(Self { a: sym(&a), b })
    }

    pub fn a(&self) -> &Mat {
        &self.a
    }

    pub fn b(&self) -> &SpdMatrix {
        &self.b
    }

    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    /// `(−½ tr(XᵀAX), −AX)`.
    pub fn value_grad(&self, x: &Mat) -> Result<(f64, Mat)> {
        check_shape("gevp_value_grad", x, self.dim(), x.ncols())?;
        let ax = &self.a * x;
        Ok((-0.5 * x.dot(&ax), -ax))
    }

    /// Dense solve through the whitened matrix `L⁻¹AL⁻ᵀ`, `B = LLᵀ`.
    pub fn oracle(&self, p: usize) -> Result<GevpSolution> {
        if p == 0 || p > self.dim() {
            return Err(Error::invalid(format!("need 0 < p <= n, got p = {p}")));
        }
        let l = self.b.cholesky_factor();
        let li_a = l
            .solve_lower_triangular(&self.a)
            .ok_or(Error::Eigensolver("singular Cholesky factor"))?;
        let c = l
            .solve_lower_triangular(&li_a.transpose())
            .ok_or(Error::Eigensolver("singular Cholesky factor"))?;
        let (eigenvalues, vectors) = sorted_symmetric_eigen(&sym(&c));
        if eigenvalues.iter().any(|v| !v.is_finite()) {
            return Err(Error::Eigensolver("non-finite eigenvalue"));
        }
        let top = vectors.columns(0, p).into_owned();
        let minimizer = l
            .transpose()
            .solve_upper_triangular(&top)
            .ok_or(Error::Eigensolver("singular Cholesky factor"))?;
        let optimum = -0.5 * eigenvalues[..p].iter().sum::<f64>();
        Ok(GevpSolution {
            optimum,
            minimizer,
            eigenvalues,
        })
    }
}

impl Problem for GevpProblem {
    fn name(&self) -> &'static str {
        "gevp"
    }

    fn num_blocks(&self) -> usize {
        1
    }

    fn constraint(&self, _block: usize) -> &SpdMatrix {
        &self.b
    }

    fn value_grad(&self, xs: &[Mat]) -> Result<(f64, Vec<Mat>)> {
        let (f, g) = GevpProblem::value_grad(self, single("gevp_value_grad", xs)?)?;
        Ok((f, vec![g]))
    }
}

/// Streaming GEVP: `A` and `B` are covariances of Gaussian vectors `a = F_A z`,
/// `b = L z` and are only seen through batch averages of `aaᵀ`, `bbᵀ`.
#[derive(Debug, Clone)]
pub struct GevpGaussianSampler {
    a_factor: Mat,
    b_factor: Mat,
    batch: usize,
    rng: ChaCha8Rng,
}

impl GevpGaussianSampler {
    /// Requires `A` positive semidefinite.
    pub fn new(problem: &GevpProblem, batch: usize, seed: u64) -> Result<Self> {
        if batch == 0 {
            return Err(Error::invalid("batch size must be positive"));
        }
        let (vals, vecs) = sorted_symmetric_eigen(problem.a());
        let floor = -1e-12 * vals[0].abs().max(1.0);
        if vals.iter().any(|&v| v < floor) {
            return Err(Error::invalid(
                "streaming GEVP needs a positive semidefinite A",
            ));
        }
        let mut a_factor = vecs;
        for (j, v) in vals.iter().enumerate() {
            a_factor.column_mut(j).scale_mut(v.max(0.0).sqrt());
        }
        Ok(Self {
            a_factor,
            b_factor: problem.b().cholesky_factor(),
            batch,
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    fn samples(&mut self, factor_is_a: bool) -> Mat {
        let n = self.a_factor.nrows();
        let z = gaussian_matrix(n, self.batch, &mut self.rng);
        if factor_is_a {
            &self.a_factor * z
        } else {
            &self.b_factor * z
        }
    }
}

impl Sampler for GevpGaussianSampler {
    fn draw(&mut self, xs: &[Mat]) -> Result<StochasticDraw> {
        let x = single("GevpGaussianSampler::draw", xs)?;
        check_shape(
            "GevpGaussianSampler::draw",
            x,
            self.a_factor.nrows(),
            x.ncols(),
        )?;
        let va = self.samples(true);
        let grad = -(&va * va.tr_mul(x)) / self.batch as f64;
        let vb = self.samples(false);
        let vb_prime = self.samples(false);
        Ok(StochasticDraw {
            grads: vec![grad],
            b_zeta: vec![CovarianceEstimate::from_samples(vb)],
            b_zeta_prime: vec![CovarianceEstimate::from_samples(vb_prime)],
        })
    }
}
