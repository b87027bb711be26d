use std::sync::Arc;

use crate::data::BatchStream;
use crate::error::{Error, Result};
use crate::linalg::{check_shape, CovarianceEstimate, Mat};
use crate::manifold::SpdMatrix;
use crate::optimize::{Sampler, StochasticDraw};
use crate::problems::{amari_distance, single, Problem};

/// `log cosh x` as `|x| + log((1 + e^{−2|x|}) / 2)`, finite for all finite `x`.
pub fn log_cosh(x: f64) -> f64 {
    let a = x.abs();
    a + (-2.0 * a).exp().ln_1p() - std::f64::consts::LN_2
}

/// `min (1/N) Σ log cosh([AX]ᵢⱼ)` subject to `Xᵀ(AᵀA/N)X = I`.
#[derive(Debug, Clone)]
pub struct IcaProblem {
    data: Arc<Mat>,
    b: SpdMatrix,
    true_mixing: Option<Arc<Mat>>,
}

impl IcaProblem {
    /// `data` is N×n with one mixed sample per row.
    pub fn new(data: Mat, true_mixing: Option<Mat>) -> Result<Self> {
        let (big_n, n) = data.shape();
        if big_n < n || n == 0 {
            return Err(Error::invalid(format!(
                "need N >= n > 0, got N = {big_n}, n = {n}"
            )));
        }
        if let Some(w) = &true_mixing {
            check_shape("IcaProblem::new", w, n, n)?;
        }
        let b = SpdMatrix::new(data.tr_mul(&data) / big_n as f64)?;
        Ok(Self {
            data: Arc::new(data),
            b,
            true_mixing: true_mixing.map(Arc::new),
        })
    }

    pub fn data(&self) -> &Mat {
        &self.data
    }

    pub fn constraint(&self) -> &SpdMatrix {
        &self.b
    }

    pub fn true_mixing(&self) -> Option<&Mat> {
        self.true_mixing.as_deref()
    }

    pub fn dim(&self) -> usize {
        self.data.ncols()
    }

    pub fn n_samples(&self) -> usize {
        self.data.nrows()
    }

    /// `((1/N) Σ log cosh(AX), (1/N) Aᵀ tanh(AX))`.
    pub fn value_grad(&self, x: &Mat) -> Result<(f64, Mat)> {
        check_shape("ica_value_grad", x, self.dim(), x.ncols())?;
        Ok(batch_value_grad(&self.data, x))
    }

    /// `a(WᵀX)` against the stored mixing matrix.
    pub fn amari_score(&self, x: &Mat) -> Option<f64> {
        let w = self.true_mixing.as_deref()?;
        amari_distance(&w.tr_mul(x)).ok()
    }
}

fn batch_value_grad(a: &Mat, x: &Mat) -> (f64, Mat) {
    let ax = a * x;
    let rows = a.nrows() as f64;
    let f = ax.iter().map(|&v| log_cosh(v)).sum::<f64>() / rows;
    let g = a.tr_mul(&ax.map(f64::tanh)) / rows;
    (f, g)
}

impl Problem for IcaProblem {
    fn name(&self) -> &'static str {
        "ica"
    }

    fn num_blocks(&self) -> usize {
        1
    }

    fn constraint(&self, _block: usize) -> &SpdMatrix {
        &self.b
    }

    fn value_grad(&self, xs: &[Mat]) -> Result<(f64, Vec<Mat>)> {
        let (f, g) = IcaProblem::value_grad(self, single("ica_value_grad", xs)?)?;
        Ok((f, vec![g]))
    }

    fn extra(&self, xs: &[Mat]) -> Option<f64> {
        self.amari_score(xs.first()?)
    }

    fn n_samples(&self) -> Option<usize> {
        Some(self.data.nrows())
    }
}

/// Row minibatches: gradient from `A_ξ`, constraints `A_ζᵀA_ζ/r`, `A_ζ'ᵀA_ζ'/r`.
#[derive(Debug, Clone)]
pub struct IcaSampler {
    problem: IcaProblem,
    stream: BatchStream,
}

impl IcaSampler {
    pub fn new(problem: &IcaProblem, batch: usize, seed: u64) -> Result<Self> {
        Ok(Self {
            stream: BatchStream::new(problem.n_samples(), batch, seed)?,
            problem: problem.clone(),
        })
    }
}

impl Sampler for IcaSampler {
    fn steps_per_epoch(&self) -> Option<usize> {
        Some(self.stream.steps_per_epoch())
    }

    fn draw(&mut self, xs: &[Mat]) -> Result<StochasticDraw> {
        let x = single("IcaSampler::draw", xs)?;
        check_shape("IcaSampler::draw", x, self.problem.dim(), x.ncols())?;
        let t = self.stream.next_triple();
        let rows = |idx: &[usize]| self.problem.data.select_rows(idx);
        let (_, g) = batch_value_grad(&rows(&t.gradient), x);
        Ok(StochasticDraw {
            grads: vec![g],
            b_zeta: vec![CovarianceEstimate::from_samples(rows(&t.zeta).transpose())],
            b_zeta_prime: vec![CovarianceEstimate::from_samples(
                rows(&t.zeta_prime).transpose(),
            )],
        })
    }
}
