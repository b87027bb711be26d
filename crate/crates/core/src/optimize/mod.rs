//! Iteration drivers for the landing method and the retraction baselines.

mod baseline;
mod sampler;
mod trace;

pub use baseline::{run_riemannian_baseline, BSource, RollingCovariance};
pub use sampler::{ExactSampler, RecordedSampler, Sampler, StochasticDraw};
pub use trace::{IterateRecord, IterateTrace, RunStatus};

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::data::gaussian_matrix;
use crate::error::{Error, Result};
use crate::landing::{
    landing_components, landing_field_stochastic, step_size_safeguard, LandingComponents,
    LandingConfig,
};
use crate::linalg::{Mat, SymmetricOperator};
use crate::manifold::{merit_terms, retract, RetractionKind};
use crate::problems::Problem;

#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub landing: LandingConfig,
    pub max_iters: Option<usize>,
    pub max_seconds: Option<f64>,
    pub seed: u64,
    pub record_merit: bool,
    /// Fixed merit penalty; `None` selects one by doubling.
    pub merit_beta: Option<f64>,
    /// Deterministic runs: clamp each step to the safeguard `η(x)`.
    pub safeguard_check: bool,
    pub record_every: usize,
    /// Stochastic runs: steps between full-data evaluations; `None` is once
    /// per epoch when the sampler knows its epoch length.
    pub eval_every: Option<usize>,
    pub field_tol: f64,
}

impl RunConfig {
    pub fn new(landing: LandingConfig, max_iters: usize) -> Self {
        Self {
            landing,
            max_iters: Some(max_iters),
            max_seconds: None,
            seed: 0,
            record_merit: false,
            merit_beta: None,
            safeguard_check: true,
            record_every: 1,
            eval_every: None,
            field_tol: 1e-10,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let iters_finite = self.max_iters.is_some();
        let secs_finite = self.max_seconds.is_some_and(f64::is_finite);
        if !iters_finite && !secs_finite {
            return Err(Error::invalid(
                "at least one of max_iters and max_seconds must be finite",
            ));
        }
        if self.max_seconds.is_some_and(|s| !(s >= 0.0)) {
            return Err(Error::invalid("max_seconds must be nonnegative"));
        }
        if self.record_every == 0 || self.eval_every == Some(0) {
            return Err(Error::invalid(
                "record_every and eval_every must be positive",
            ));
        }
        if self.merit_beta.is_some_and(|b| !(b > 0.0)) {
            return Err(Error::invalid("merit_beta must be positive"));
        }
        if !(self.field_tol >= 0.0) {
            return Err(Error::invalid("field_tol must be nonnegative"));
        }
        Ok(())
    }

    fn out_of_budget(&self, k: usize, start: &Instant) -> Option<RunStatus> {
        if self.max_iters.is_some_and(|m| k >= m) {
            return Some(RunStatus::IterationBudget);
        }
        if self
            .max_seconds
            .is_some_and(|s| start.elapsed().as_secs_f64() >= s)
        {
            return Some(RunStatus::TimeBudget);
        }
        None
    }
}

/// Gaussian blocks of width `p`, made exactly feasible by a Cholesky-QR
/// retraction of the zero direction.
pub fn initial_point(problem: &dyn Problem, p: usize, seed: u64) -> Result<Vec<Mat>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..problem.num_blocks())
        .map(|i| {
            let b = problem.constraint(i);
            let x = gaussian_matrix(b.dim(), p, &mut rng);
            let zero = Mat::zeros(b.dim(), p);
            retract(&x, &zero, b, RetractionKind::CholeskyQr)
        })
        .collect()
}

fn check_blocks(problem: &dyn Problem, xs: &[Mat]) -> Result<()> {
    if xs.len() != problem.num_blocks() {
        return Err(Error::invalid(format!(
            "{} expects {} blocks, got {}",
            problem.name(),
            problem.num_blocks(),
            xs.len()
        )));
    }
    for (i, x) in xs.iter().enumerate() {
        crate::linalg::check_shape("initial point", x, problem.constraint(i).dim(), x.ncols())?;
    }
    Ok(())
}

fn norm_of(parts: impl Iterator<Item = f64>) -> f64 {
    parts.map(|v| v * v).sum::<f64>().sqrt()
}

/// Projects blocks outside the safe region back onto the manifold.
fn enter_safe_region(problem: &dyn Problem, xs: &[Mat], epsilon: f64) -> Result<Vec<Mat>> {
    xs.iter()
        .enumerate()
        .map(|(i, x)| {
            let b = problem.constraint(i);
            let h = crate::manifold::constraint_residual(x, b)?.frobenius_norm;
            if h <= epsilon {
                Ok(x.clone())
            } else {
                retract(
                    x,
                    &Mat::zeros(x.nrows(), x.ncols()),
                    b,
                    RetractionKind::CholeskyQr,
                )
            }
        })
        .collect()
}

/// Full-data quantities at one point.
struct Evaluation {
    f_val: f64,
    components: Vec<LandingComponents>,
    grads: Vec<Mat>,
}

impl Evaluation {
    fn at(problem: &dyn Problem, xs: &[Mat], cfg: &LandingConfig) -> Result<Self> {
        let (f_val, grads) = problem.value_grad(xs)?;
        let components = xs
            .iter()
            .zip(&grads)
            .enumerate()
            .map(|(i, (x, g))| landing_components(x, g, problem.constraint(i), cfg.variant))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            f_val,
            components,
            grads,
        })
    }

    fn h_blocks(&self) -> Vec<f64> {
        self.components
            .iter()
            .map(|c| c.residual.frobenius_norm)
            .collect()
    }

    fn h_norm(&self) -> f64 {
        norm_of(self.components.iter().map(|c| c.residual.frobenius_norm))
    }

    fn psi_norm(&self) -> f64 {
        norm_of(self.components.iter().map(|c| c.psi_norm))
    }

    fn field_norm(&self, omega: f64) -> f64 {
        norm_of(self.components.iter().map(|c| c.field_norm(omega)))
    }

    /// `(−Σ⟨hᵢ, λᵢ⟩, Σ‖hᵢ‖²)`.
    fn merit_parts(&self, problem: &dyn Problem, xs: &[Mat]) -> Result<(f64, f64)> {
        let mut coupling = 0.0;
        let mut h_sq = 0.0;
        for (i, (x, g)) in xs.iter().zip(&self.grads).enumerate() {
            let bx = problem.constraint(i).apply(x);
            let t = merit_terms(x, &bx, g)?;
            coupling += t.coupling;
            h_sq += t.h_sq;
        }
        Ok((coupling, h_sq))
    }

    fn merit(&self, problem: &dyn Problem, xs: &[Mat], beta: f64) -> Result<f64> {
        let (coupling, h_sq) = self.merit_parts(problem, xs)?;
        Ok(self.f_val - coupling + beta * h_sq)
    }

    /// Smallest per-block safeguard step; `None` when every field vanished.
    fn safeguard(&self, problem: &dyn Problem, cfg: &LandingConfig) -> Result<Option<f64>> {
        let mut eta = f64::INFINITY;
        for (i, c) in self.components.iter().enumerate() {
            let l_n = problem.constraint(i).smoothness_constants(cfg.epsilon)?.l_n;
            match step_size_safeguard(
                c.grad_n_norm,
                c.field_norm(cfg.omega),
                c.residual.frobenius_norm,
                l_n,
                cfg.omega,
                cfg.epsilon,
            ) {
                Ok(v) => eta = eta.min(v),
                Err(Error::FieldVanished) => {}
                Err(e) => return Err(e),
            }
        }
        Ok(eta.is_finite().then_some(eta))
    }
}

fn all_finite(xs: &[Mat]) -> bool {
    xs.iter().all(|x| x.iter().all(|v| v.is_finite()))
}

/// One deterministic landing step size: the schedule, clamped by the
/// safeguard when enabled.
fn deterministic_eta(
    ev: &Evaluation,
    problem: &dyn Problem,
    cfg: &RunConfig,
    k: usize,
) -> Result<(f64, Option<f64>)> {
    let scheduled = cfg.landing.step.eta(k);
    if !cfg.safeguard_check {
        return Ok((scheduled, None));
    }
    let guard = ev.safeguard(problem, &cfg.landing)?;
    Ok((guard.map_or(scheduled, |g| scheduled.min(g)), guard))
}

fn landing_step(xs: &mut [Mat], ev: &Evaluation, omega: f64, eta: f64) {
    for (x, c) in xs.iter_mut().zip(&ev.components) {
        *x -= c.field(omega) * eta;
    }
}

/// Doubles `β` from `start` until the merit decreases monotonically over
/// `trial_iters` deterministic landing steps.
pub fn select_merit_beta(
    problem: &dyn Problem,
    x0: &[Mat],
    cfg: &RunConfig,
    start: f64,
    trial_iters: usize,
) -> Result<f64> {
    if !(start > 0.0) {
        return Err(Error::invalid(
            "merit beta search must start from a positive value",
        ));
    }
    let mut parts = Vec::with_capacity(trial_iters + 1);
    let mut xs = x0.to_vec();
    for k in 0..=trial_iters {
        let ev = Evaluation::at(problem, &xs, &cfg.landing)?;
        parts.push((ev.f_val, ev.merit_parts(problem, &xs)?));
        if k == trial_iters {
            break;
        }
        let (eta, _) = deterministic_eta(&ev, problem, cfg, k)?;
        landing_step(&mut xs, &ev, cfg.landing.omega, eta);
    }
    let mut beta = start;
    for _ in 0..200 {
        let merits: Vec<f64> = parts.iter().map(|(f, (c, h))| f - c + beta * h).collect();
        if merits.windows(2).all(|w| w[1] <= w[0] + MERIT_SLACK) {
            return Ok(beta);
        }
        beta *= 2.0;
    }
    Err(Error::invalid(
        "no merit penalty up to 2^200 times the start gives monotone descent",
    ))
}

const MERIT_SLACK: f64 = 1e-12;
const MERIT_TRIAL_ITERS: usize = 10;

/// Starting penalty for the doubling search: `ρ / (4 C_h² ω)` from the
/// worst-conditioned block with `ρ` of the chosen variant.
pub fn merit_beta_heuristic(problem: &dyn Problem, cfg: &LandingConfig) -> Result<f64> {
    let mut beta = f64::INFINITY;
    for i in 0..problem.num_blocks() {
        let b = problem.constraint(i);
        let (b1, bn) = b.extreme_eigenvalues();
        let c = b.smoothness_constants(cfg.epsilon)?;
        let rho = match cfg.variant {
            crate::landing::AscentVariant::PsiB => 1.0 / (b1 * (b1 / bn) * (1.0 + cfg.epsilon)),
            crate::landing::AscentVariant::PsiBRiemannian => bn / (1.0 + cfg.epsilon),
        };
        beta = beta.min(rho / (4.0 * c.c_h * c.c_h * cfg.omega));
    }
    Ok(beta)
}

fn record(k: usize, start: &Instant, ev: &Evaluation, omega: f64, eta: f64) -> IterateRecord {
    IterateRecord {
        k,
        time_s: start.elapsed().as_secs_f64(),
        f_val: ev.f_val,
        h_norm: ev.h_norm(),
        psi_norm: ev.psi_norm(),
        field_norm: ev.field_norm(omega),
        eta,
        safeguard: None,
        merit: None,
        extra: None,
        h_blocks: ev.h_blocks(),
    }
}

/// `X_{k+1} = X_k − η_k Λ(X_k)` with full-data gradients and constraints.
pub fn run_landing_deterministic(
    problem: &dyn Problem,
    x0: &[Mat],
    cfg: &RunConfig,
) -> Result<IterateTrace> {
    cfg.validate()?;
    check_blocks(problem, x0)?;
    let lc = &cfg.landing;
    let mut xs = enter_safe_region(problem, x0, lc.epsilon)?;
    let merit_beta = match (cfg.record_merit, cfg.merit_beta) {
        (false, _) => None,
        (true, Some(b)) => Some(b),
        (true, None) => {
            let start = merit_beta_heuristic(problem, lc)?;
            Some(select_merit_beta(
                problem,
                &xs,
                cfg,
                start,
                MERIT_TRIAL_ITERS,
            )?)
        }
    };
    let mut trace = IterateTrace::new(merit_beta);
    let start = Instant::now();
    let mut k = 0;
    loop {
        let ev = Evaluation::at(problem, &xs, lc)?;
        let (eta, guard) = deterministic_eta(&ev, problem, cfg, k)?;
        let converged = ev.field_norm(lc.omega) <= cfg.field_tol;
        let stop = if converged {
            Some(RunStatus::Converged)
        } else {
            cfg.out_of_budget(k, &start)
        };
        if stop.is_some() || k % cfg.record_every == 0 {
            let mut rec = record(
                k,
                &start,
                &ev,
                lc.omega,
                if stop.is_some() { 0.0 } else { eta },
            );
            rec.safeguard = guard;
            if let Some(beta) = merit_beta {
                rec.merit = Some(ev.merit(problem, &xs, beta)?);
            }
            rec.extra = problem.extra(&xs);
            trace.push(rec);
        }
        if let Some(status) = stop {
            trace.finish(status, xs);
            return Ok(trace);
        }
        landing_step(&mut xs, &ev, lc.omega, eta);
        k += 1;
        if !all_finite(&xs) {
            trace.finish(RunStatus::Diverged, xs);
            return Err(Error::Diverged {
                iteration: k,
                trace: Box::new(trace),
            });
        }
        let h_blocks = xs
            .iter()
            .enumerate()
            .map(|(i, x)| {
                crate::manifold::constraint_residual(x, problem.constraint(i))
                    .map(|r| r.frobenius_norm)
            })
            .collect::<Result<Vec<_>>>()?;
        if let Some(&h) = h_blocks.iter().find(|&&h| h > lc.epsilon) {
            trace.safe_region_violations += 1;
            if !cfg.safeguard_check {
                trace.finish(RunStatus::LeftSafeRegion, xs);
                return Err(Error::LeftSafeRegion {
                    iteration: k,
                    h_norm: h,
                    epsilon: lc.epsilon,
                    trace: Box::new(trace),
                });
            }
        }
    }
}

/// `X_{k+1} = X_k − η_k Λ_{ξ,ζ,ζ'}(X_k)` with one fresh independent triple per
/// step. Full-data metrics are evaluated every `eval_every` steps; safe-region
/// exits are counted, not prevented.
pub fn run_landing_stochastic(
    problem: &dyn Problem,
    sampler: &mut dyn Sampler,
    x0: &[Mat],
    cfg: &RunConfig,
) -> Result<IterateTrace> {
    cfg.validate()?;
    check_blocks(problem, x0)?;
    let lc = &cfg.landing;
    let eval_every = cfg
        .eval_every
        .or_else(|| sampler.steps_per_epoch())
        .unwrap_or(1)
        .max(1);
    let mut xs = enter_safe_region(problem, x0, lc.epsilon)?;
    let mut trace = IterateTrace::new(cfg.merit_beta.filter(|_| cfg.record_merit));
    let start = Instant::now();
    let mut k = 0;
    loop {
        let stop = cfg.out_of_budget(k, &start);
        let eta = lc.step.eta(k);
        if stop.is_some() || k % eval_every == 0 {
            let ev = Evaluation::at(problem, &xs, lc)?;
            let mut rec = record(
                k,
                &start,
                &ev,
                lc.omega,
                if stop.is_some() { 0.0 } else { eta },
            );
            if let Some(beta) = trace.merit_beta {
                rec.merit = Some(ev.merit(problem, &xs, beta)?);
            }
            rec.extra = problem.extra(&xs);
            trace.push(rec);
        }
        if let Some(status) = stop {
            trace.finish(status, xs);
            return Ok(trace);
        }
        let draw = sampler.draw(&xs)?;
        draw.check(xs.len())?;
        for (i, x) in xs.iter_mut().enumerate() {
            let field = landing_field_stochastic(
                x,
                &draw.grads[i],
                &draw.b_zeta[i],
                &draw.b_zeta_prime[i],
                lc.omega,
            )?;
            *x -= field * eta;
        }
        k += 1;
        if !all_finite(&xs) {
            trace.finish(RunStatus::Diverged, xs);
            return Err(Error::Diverged {
                iteration: k,
                trace: Box::new(trace),
            });
        }
        for (i, x) in xs.iter().enumerate() {
            if crate::manifold::constraint_residual(x, problem.constraint(i))?.frobenius_norm
                > lc.epsilon
            {
                trace.safe_region_violations += 1;
                break;
            }
        }
    }
}
