use std::time::Instant;

use crate::error::{Error, Result};
use crate::linalg::{CovarianceEstimate, Mat};
use crate::manifold::{constraint_residual, retract, riemannian_gradient, RetractionKind};
use crate::optimize::{
    all_finite, check_blocks, norm_of, IterateRecord, IterateTrace, RunConfig, RunStatus, Sampler,
};
use crate::problems::Problem;

/// Where the baseline takes its constraint matrix from.
pub enum BSource<'a> {
    /// The exact `B` of each block, with full gradients.
    Fixed,
    /// Running means of all constraint batches drawn so far, with stochastic
    /// gradients from the same sampler.
    RollingAverage(&'a mut dyn Sampler),
}

/// Running mean of PSD batch estimates.
#[derive(Debug, Clone)]
pub struct RollingCovariance {
    sum: Mat,
    count: usize,
}

impl RollingCovariance {
    pub fn new(n: usize) -> Self {
        Self {
            sum: Mat::zeros(n, n),
            count: 0,
        }
    }

    pub fn update(&mut self, estimate: &CovarianceEstimate) {
        self.sum += estimate.to_dense();
        self.count += 1;
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn mean(&self) -> Option<Mat> {
        (self.count > 0).then(|| &self.sum / self.count as f64)
    }
}

fn evaluate(problem: &dyn Problem, xs: &[Mat]) -> Result<(f64, Vec<f64>, f64)> {
    let (f, grads) = problem.value_grad(xs)?;
    let mut h = Vec::with_capacity(xs.len());
    let mut gnorm = Vec::with_capacity(xs.len());
    for (i, (x, g)) in xs.iter().zip(&grads).enumerate() {
        let b = problem.constraint(i);
        h.push(constraint_residual(x, b)?.frobenius_norm);
        gnorm.push(riemannian_gradient(x, g, b)?.norm());
    }
    Ok((f, h, norm_of(gnorm.into_iter())))
}

/// Riemannian gradient descent `X ← Retr_B(X, −η grad f(X))`.
///
/// With a rolling-average source, `B` in both the gradient projection and
/// the retraction is the current running mean, so each iterate is feasible
/// for the mean it was retracted with. Recorded metrics always use the exact
/// `B`; `psi_norm` holds the Riemannian gradient norm.
pub fn run_riemannian_baseline(
    problem: &dyn Problem,
    mut source: BSource<'_>,
    x0: &[Mat],
    cfg: &RunConfig,
    kind: RetractionKind,
) -> Result<IterateTrace> {
    cfg.validate()?;
    check_blocks(problem, x0)?;
    let mut xs = x0
        .iter()
        .enumerate()
        .map(|(i, x)| {
            retract(
                x,
                &Mat::zeros(x.nrows(), x.ncols()),
                problem.constraint(i),
                kind,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let (eval_every, mut rolling) = match &source {
        BSource::Fixed => (cfg.record_every, Vec::new()),
        BSource::RollingAverage(s) => (
            cfg.eval_every
                .or_else(|| s.steps_per_epoch())
                .unwrap_or(1)
                .max(1),
            (0..problem.num_blocks())
                .map(|i| RollingCovariance::new(problem.constraint(i).dim()))
                .collect(),
        ),
    };
    let mut trace = IterateTrace::new(None);
    let start = Instant::now();
    let mut k = 0;
    loop {
        let eta = cfg.landing.step.eta(k);
        let mut stop = cfg.out_of_budget(k, &start);
        let fixed = matches!(source, BSource::Fixed);
        if stop.is_some() || k % eval_every == 0 || fixed {
            let (f_val, h_blocks, gnorm) = evaluate(problem, &xs)?;
            if fixed && gnorm <= cfg.field_tol {
                stop = Some(RunStatus::Converged);
            }
            if stop.is_some() || k % eval_every == 0 {
                trace.push(IterateRecord {
                    k,
                    time_s: start.elapsed().as_secs_f64(),
                    f_val,
                    h_norm: norm_of(h_blocks.iter().copied()),
                    psi_norm: gnorm,
                    field_norm: gnorm,
                    eta: if stop.is_some() { 0.0 } else { eta },
                    safeguard: None,
                    merit: None,
                    extra: problem.extra(&xs),
                    h_blocks,
                });
            }
        }
        if let Some(status) = stop {
            trace.finish(status, xs);
            return Ok(trace);
        }
        match &mut source {
            BSource::Fixed => {
                let (_, grads) = problem.value_grad(&xs)?;
                for (i, (x, g)) in xs.iter_mut().zip(&grads).enumerate() {
                    let b = problem.constraint(i);
                    let rg = riemannian_gradient(x, g, b)?;
                    *x = retract(x, &(rg * -eta), b, kind)?;
                }
            }
            BSource::RollingAverage(sampler) => {
                let draw = sampler.draw(&xs)?;
                draw.check(xs.len())?;
                for (i, x) in xs.iter_mut().enumerate() {
                    rolling[i].update(&draw.b_zeta[i]);
                    rolling[i].update(&draw.b_zeta_prime[i]);
                    let b_bar = rolling[i].mean().ok_or(Error::SamplerExhausted)?;
                    let rg = riemannian_gradient(x, &draw.grads[i], &b_bar)?;
                    *x = retract(x, &(rg * -eta), &b_bar, kind)?;
                }
            }
        }
        k += 1;
        if !all_finite(&xs) {
            trace.finish(RunStatus::Diverged, xs);
            return Err(Error::Diverged {
                iteration: k,
                trace: Box::new(trace),
            });
        }
    }
}
