use std::sync::Arc;

use rand::Rng;

use crate::data::{BatchStream, BatchTriple};
use crate::error::{Error, Result};
use crate::linalg::{check_shape, sorted_symmetric_eigen, spectral_map, CovarianceEstimate, Mat};
use crate::manifold::SpdMatrix;
use crate::optimize::{Sampler, StochasticDraw};
use crate::problems::Problem;

const DEFAULT_RIDGE_FACTOR: f64 = 1e-3;

/// `min −tr(Xᵀ C12 Y)` subject to `XᵀC11X = I`, `YᵀC22Y = I`.
///
/// Data matrices hold one sample per column and are centered on construction.
#[derive(Debug, Clone)]
pub struct CcaProblem {
    d1: Arc<Mat>,
    d2: Arc<Mat>,
    ridge: f64,
    c11: SpdMatrix,
    c22: SpdMatrix,
    c12: Arc<Mat>,
}

#[derive(Debug, Clone)]
pub struct CcaSolution {
    pub optimum: f64,
    pub x: Mat,
    pub y: Mat,
    /// All canonical correlations, descending.
    pub correlations: Vec<f64>,
}

/// One minibatch triple in factored form. `B` blocks are ridge-free.
#[derive(Debug, Clone)]
pub struct CcaSample {
    /// `D1_ξ`, `D2_ξ`; the minibatch cross-covariance is `D1_ξ D2_ξᵀ / r`.
    pub cross_left: Mat,
    pub cross_right: Mat,
    pub b_zeta: [CovarianceEstimate; 2],
    pub b_zeta_prime: [CovarianceEstimate; 2],
}

impl CcaSample {
    pub fn cross_covariance(&self) -> Mat {
        &self.cross_left * self.cross_right.transpose() / self.cross_left.ncols() as f64
    }

    /// `(−C12_ξ Y, −C12_ξᵀ X)` without forming `C12_ξ`.
    pub fn gradients(&self, x: &Mat, y: &Mat) -> (Mat, Mat) {
        let r = self.cross_left.ncols() as f64;
        let gx = -(&self.cross_left * self.cross_right.tr_mul(y)) / r;
        let gy = -(&self.cross_right * self.cross_left.tr_mul(x)) / r;
        (gx, gy)
    }
}

fn centered(mut d: Mat) -> Mat {
    let mean = d.column_mean();
    for mut col in d.column_iter_mut() {
        col -= &mean;
    }
    d
}

fn with_ridge(c: &Mat, ridge: f64) -> Result<SpdMatrix> {
    let mut c = c.clone();
    for i in 0..c.nrows() {
        c[(i, i)] += ridge;
    }
    SpdMatrix::new(c)
}

fn inverse_sqrt(c: &SpdMatrix) -> Result<Mat> {
    let (vals, vecs) = sorted_symmetric_eigen(c.matrix());
    if vals.last().is_none_or(|&v| v <= 0.0) {
        return Err(Error::Eigensolver(
            "covariance block is not positive definite",
        ));
    }
    Ok(spectral_map(&vals, &vecs, |v| 1.0 / v.sqrt()))
}

impl CcaProblem {
    /// `ridge = None` selects `1e-3 · tr(C) / n` over both views pooled.
    pub fn new(d1: Mat, d2: Mat, ridge: Option<f64>) -> Result<Self> {
        if d1.ncols() != d2.ncols() {
            return Err(Error::invalid(format!(
                "views must have the same number of samples, got {} and {}",
                d1.ncols(),
                d2.ncols()
            )));
        }
        let big_n = d1.ncols();
        if big_n < 2 || d1.nrows() == 0 || d2.nrows() == 0 {
            return Err(Error::invalid(
                "CCA needs nonempty views and at least two samples",
            ));
        }
        if let Some(g) = ridge {
            if !(g >= 0.0 && g.is_finite()) {
                return Err(Error::invalid(format!(
                    "ridge must be finite and nonnegative, got {g}"
                )));
            }
        }
        let d1 = centered(d1);
        let d2 = centered(d2);
        let nf = big_n as f64;
        let raw11 = &d1 * d1.transpose() / nf;
        let raw22 = &d2 * d2.transpose() / nf;
        let ridge = ridge.unwrap_or_else(|| {
            DEFAULT_RIDGE_FACTOR * (raw11.trace() + raw22.trace())
                / (d1.nrows() + d2.nrows()) as f64
        });
        let c11 = with_ridge(&raw11, ridge)?;
        let c22 = with_ridge(&raw22, ridge)?;
        let c12 = &d1 * d2.transpose() / nf;
        Ok(Self {
            d1: Arc::new(d1),
            d2: Arc::new(d2),
            ridge,
            c11,
            c22,
            c12: Arc::new(c12),
        })
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.d1.nrows(), self.d2.nrows())
    }

    pub fn n_samples(&self) -> usize {
        self.d1.ncols()
    }

    pub fn ridge(&self) -> f64 {
        self.ridge
    }

    pub fn views(&self) -> (&Mat, &Mat) {
        (&self.d1, &self.d2)
    }

    pub fn c11(&self) -> &SpdMatrix {
        &self.c11
    }

    pub fn c22(&self) -> &SpdMatrix {
        &self.c22
    }

    pub fn c12(&self) -> &Mat {
        &self.c12
    }

    /// `(−tr(XᵀC12Y), −C12Y, −C12ᵀX)`.
    pub fn value_grad(&self, x: &Mat, y: &Mat) -> Result<(f64, Mat, Mat)> {
        let (n1, n2) = self.dims();
        check_shape("cca_value_grad", x, n1, x.ncols())?;
        check_shape("cca_value_grad", y, n2, x.ncols())?;
        let c12y = &*self.c12 * y;
        let f = -x.dot(&c12y);
        let gy = -self.c12.tr_mul(x);
        Ok((f, -c12y, gy))
    }

    /// Whitening-SVD solution: `σ` are the singular values of
    /// `C11^{-1/2} C12 C22^{-1/2}` and the optimum is `−Σ_{i≤p} σᵢ`.
    pub fn oracle(&self, p: usize) -> Result<CcaSolution> {
        let (n1, n2) = self.dims();
        if p == 0 || p > n1.min(n2) {
            return Err(Error::invalid(format!(
                "need 0 < p <= min(n1, n2), got p = {p}"
            )));
        }
        let w1 = inverse_sqrt(&self.c11)?;
        let w2 = inverse_sqrt(&self.c22)?;
        let m = &w1 * &*self.c12 * &w2;
        let svd = m.svd(true, true);
        let u = svd.u.ok_or(Error::Eigensolver("SVD did not return U"))?;
        let vt = svd.v_t.ok_or(Error::Eigensolver("SVD did not return Vᵀ"))?;
        let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
        order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
        let correlations: Vec<f64> = order.iter().map(|&i| svd.singular_values[i]).collect();
        let up = Mat::from_fn(n1, p, |r, c| u[(r, order[c])]);
        let vp = Mat::from_fn(n2, p, |r, c| vt[(order[c], r)]);
        Ok(CcaSolution {
            optimum: -correlations[..p].iter().sum::<f64>(),
            x: w1 * up,
            y: w2 * vp,
            correlations,
        })
    }

    /// Minibatch blocks from explicit sample indices.
    pub fn sample_from_triple(&self, triple: &BatchTriple) -> Result<CcaSample> {
        let n = self.n_samples();
        let batches = [&triple.gradient, &triple.zeta, &triple.zeta_prime];
        if batches
            .iter()
            .any(|b| b.is_empty() || b.iter().any(|&i| i >= n))
        {
            return Err(Error::invalid(
                "batch indices must be nonempty and within the dataset",
            ));
        }
        let pick = |d: &Mat, idx: &[usize]| d.select_columns(idx);
        let pair = |idx: &[usize]| {
            [
                CovarianceEstimate::from_samples(pick(&self.d1, idx)),
                CovarianceEstimate::from_samples(pick(&self.d2, idx)),
            ]
        };
        Ok(CcaSample {
            cross_left: pick(&self.d1, &triple.gradient),
            cross_right: pick(&self.d2, &triple.gradient),
            b_zeta: pair(&triple.zeta),
            b_zeta_prime: pair(&triple.zeta_prime),
        })
    }

    /// Three independent uniform with-replacement batches of size `r`.
    pub fn stochastic_sample<R: Rng + ?Sized>(&self, r: usize, rng: &mut R) -> Result<CcaSample> {
        let n = self.n_samples();
        if r == 0 || r > n {
            return Err(Error::invalid(format!(
                "batch size must lie in 1..={n}, got {r}"
            )));
        }
        let mut draw = || (0..r).map(|_| rng.random_range(0..n)).collect::<Vec<_>>();
        let triple = BatchTriple {
            gradient: draw(),
            zeta: draw(),
            zeta_prime: draw(),
        };
        self.sample_from_triple(&triple)
    }
}

impl Problem for CcaProblem {
    fn name(&self) -> &'static str {
        "cca"
    }

    fn num_blocks(&self) -> usize {
        2
    }

    fn constraint(&self, block: usize) -> &SpdMatrix {
        if block == 0 {
            &self.c11
        } else {
            &self.c22
        }
    }

    fn value_grad(&self, xs: &[Mat]) -> Result<(f64, Vec<Mat>)> {
        match xs {
            [x, y] => {
                let (f, gx, gy) = CcaProblem::value_grad(self, x, y)?;
                Ok((f, vec![gx, gy]))
            }
            _ => Err(Error::invalid(format!(
                "cca expects two blocks, got {}",
                xs.len()
            ))),
        }
    }

    fn n_samples(&self) -> Option<usize> {
        Some(self.d1.ncols())
    }
}

/// Minibatch sampler whose constraint estimates carry the problem's ridge, so
/// their expectation is exactly `C11`, `C22`.
#[derive(Debug, Clone)]
pub struct CcaSampler {
    problem: CcaProblem,
    stream: BatchStream,
}

impl CcaSampler {
    pub fn new(problem: &CcaProblem, batch: usize, seed: u64) -> Result<Self> {
        Ok(Self {
            stream: BatchStream::new(problem.n_samples(), batch, seed)?,
            problem: problem.clone(),
        })
    }
}

impl Sampler for CcaSampler {
    fn steps_per_epoch(&self) -> Option<usize> {
        Some(self.stream.steps_per_epoch())
    }

    fn draw(&mut self, xs: &[Mat]) -> Result<StochasticDraw> {
        let [x, y] = xs else {
            return Err(Error::invalid(format!(
                "cca expects two blocks, got {}",
                xs.len()
            )));
        };
        let s = self
            .problem
            .sample_from_triple(&self.stream.next_triple())?;
        let (gx, gy) = s.gradients(x, y);
        let ridge = self.problem.ridge;
        let shift =
            |pair: [CovarianceEstimate; 2]| pair.into_iter().map(|b| b.with_shift(ridge)).collect();
        Ok(StochasticDraw {
            grads: vec![gx, gy],
            b_zeta: shift(s.b_zeta),
            b_zeta_prime: shift(s.b_zeta_prime),
        })
    }
}
