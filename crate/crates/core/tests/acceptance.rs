//! Acceptance suite. Each criterion prints one PASS/FAIL line.
//!
//! Run a subset with `cargo test --test acceptance -- <substring>`.

use std::process::ExitCode;
use std::time::Instant;

use gstiefel_landing::data::{
    gaussian_matrix, gen_cca_dataset, gen_ica_dataset, gen_spd_pair, SpectrumKind, SpectrumSpec,
};
use gstiefel_landing::landing::{
    landing_components, landing_field_deterministic, landing_field_stochastic, step_size_safeguard,
    variance_bound, AscentVariant, LandingConfig, StepSchedule, VarianceInputs,
};
use gstiefel_landing::linalg::{inner, sorted_symmetric_eigen, sym};
use gstiefel_landing::manifold::{constraint_residual, retract, tangent_project, RetractionKind};
use gstiefel_landing::optimize::{
    initial_point, run_landing_deterministic, run_landing_stochastic, RunConfig, Sampler,
};
use gstiefel_landing::problems::{
    CcaSampler, GevpGaussianSampler, GevpProblem, IcaSampler, Problem,
};
use gstiefel_landing::{Mat, Result, SpdMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self {
            pass,
            detail: detail.into(),
        }
    }
}

type Criterion = (&'static str, fn() -> Result<Outcome>);

const CRITERIA: &[Criterion] = &[
    ("orthogonality_invariant", orthogonality_invariant),
    ("relative_ascent_inequality", relative_ascent_inequality),
    ("unbiased_by_enumeration", unbiased_by_enumeration),
    ("retraction_suite", retraction_suite),
    ("deterministic_gevp", deterministic_gevp),
    ("safeguard_guarantee", safeguard_guarantee),
    ("merit_descent", merit_descent),
    ("stochastic_gevp", stochastic_gevp),
    ("stochastic_cca", stochastic_cca),
    ("stochastic_ica", stochastic_ica),
    ("variance_bound", variance_bound_holds),
    ("gradient_checks", gradient_checks),
];

fn main() -> ExitCode {
    let filters: Vec<String> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .collect();
    let mut failed = 0;
    let mut ran = 0;
    for (name, run) in CRITERIA {
        if !filters.is_empty() && !filters.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        ran += 1;
        let start = Instant::now();
        let outcome = run().unwrap_or_else(|e| Outcome::new(false, format!("error: {e}")));
        let secs = start.elapsed().as_secs_f64();
        if !outcome.pass {
            failed += 1;
        }
        let tag = if outcome.pass { "PASS" } else { "FAIL" };
        println!("{tag} {name:<28} {} [{secs:.2} s]", outcome.detail);
    }
    println!("acceptance: {} of {ran} criteria passed", ran - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn gevp(n: usize, kappa_a: f64, kappa_b: f64, seed: u64) -> Result<GevpProblem> {
    let sa = SpectrumSpec::new(SpectrumKind::Equidistant, kappa_a, n)?;
    let sb = SpectrumSpec::new(SpectrumKind::Exponential, kappa_b, n)?;
    let (a, b) = gen_spd_pair(&sa, &sb, seed)?;
    GevpProblem::new(a, b)
}

fn landing(
    omega: f64,
    epsilon: f64,
    variant: AscentVariant,
    step: StepSchedule,
) -> Result<LandingConfig> {
    LandingConfig::new(omega, epsilon, variant, step)
}

/// `X₀ (I + H)^{1/2}` with feasible `X₀` and symmetric `H` of norm `< ε`, so
/// that `h(X) = H` exactly.
fn safe_state(problem: &GevpProblem, p: usize, epsilon: f64, rng: &mut ChaCha8Rng) -> Result<Mat> {
    let x0 = initial_point(problem, p, rng.random())?.remove(0);
    let h = sym(&gaussian_matrix(p, p, rng));
    let h = &h * (epsilon * rng.random::<f64>() / h.norm());
    let (vals, vecs) = sorted_symmetric_eigen(&(Mat::identity(p, p) + h));
    let mut root = vecs.clone();
    for (j, v) in vals.iter().enumerate() {
        root.column_mut(j).scale_mut(v.sqrt());
    }
    Ok(x0 * root * vecs.transpose())
}

fn safe_states(n: usize, p: usize, epsilon: f64, count: usize) -> Result<(GevpProblem, Vec<Mat>)> {
    let problem = gevp(n, 10.0, 10.0, 0)?;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let states = (0..count)
        .map(|_| safe_state(&problem, p, epsilon, &mut rng))
        .collect::<Result<Vec<_>>>()?;
    Ok((problem, states))
}

const VARIANTS: [AscentVariant; 2] = [AscentVariant::PsiB, AscentVariant::PsiBRiemannian];

fn orthogonality_invariant() -> Result<Outcome> {
    let start = Instant::now();
    let (problem, states) = safe_states(20, 4, 0.5, 100)?;
    let mut worst: f64 = 0.0;
    for x in &states {
        let (_, g) = problem.value_grad(x)?;
        for variant in VARIANTS {
            let c = landing_components(x, &g, problem.b(), variant)?;
            worst = worst.max(inner(&c.psi, &c.grad_n).abs() / (c.psi_norm * c.grad_n_norm));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    Ok(Outcome::new(
        worst <= 1e-8 && secs < 1.0,
        format!(
            "max |<psi, grad N>| / (|psi| |grad N|) = {worst:.2e} over 100 states, {secs:.3} s"
        ),
    ))
}

fn relative_ascent_inequality() -> Result<Outcome> {
    let epsilon = 0.5;
    let (problem, states) = safe_states(20, 4, epsilon, 100)?;
    let (beta_1, beta_n) = problem.b().extreme_eigenvalues();
    let kappa = beta_1 / beta_n;
    let rho = |v: AscentVariant| match v {
        AscentVariant::PsiB => 1.0 / (beta_1 * kappa * (1.0 + epsilon)),
        AscentVariant::PsiBRiemannian => beta_n / (1.0 + epsilon),
    };
    let mut worst = f64::INFINITY;
    for x in &states {
        let (_, g) = problem.value_grad(x)?;
        for variant in VARIANTS {
            let c = landing_components(x, &g, problem.b(), variant)?;
            let ratio = inner(&c.psi, &g) / (rho(variant) * c.psi_norm * c.psi_norm);
            worst = worst.min(ratio);
        }
    }
    Ok(Outcome::new(
        worst >= 1.0 - 1e-8,
        format!("min <psi, grad f> / (rho |psi|^2) = {worst:.4} (kappa_B = {kappa:.1})"),
    ))
}

fn unbiased_by_enumeration() -> Result<Outcome> {
    let (n, p, omega) = (4, 2, 0.7);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let x = gaussian_matrix(n, p, &mut rng);
    let grads = [
        gaussian_matrix(n, p, &mut rng),
        gaussian_matrix(n, p, &mut rng),
    ];
    let psd = |rng: &mut ChaCha8Rng| {
        let f = gaussian_matrix(n, n, rng);
        &f * f.transpose()
    };
    let bs = [psd(&mut rng), psd(&mut rng)];
    let g_mean = (&grads[0] + &grads[1]) * 0.5;
    let b_mean = SpdMatrix::new((&bs[0] + &bs[1]) * 0.5)?;
    let mut mean = Mat::zeros(n, p);
    for g in &grads {
        for u in &bs {
            for v in &bs {
                mean += landing_field_stochastic(&x, g, u, v, omega)? / 8.0;
            }
        }
    }
    let cfg = landing(
        omega,
        0.5,
        AscentVariant::PsiB,
        StepSchedule::constant(1.0)?,
    )?;
    let exact = landing_field_deterministic(&x, &g_mean, &b_mean, &cfg)?;
    let err = (&mean - &exact).amax();
    Ok(Outcome::new(
        err <= 1e-12,
        format!(
            "max entry gap over 8 atoms = {err:.2e}, field scale {:.2}",
            exact.amax()
        ),
    ))
}

fn retraction_suite() -> Result<Outcome> {
    let problem = gevp(20, 10.0, 10.0, 3)?;
    let b = problem.b();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let x = initial_point(&problem, 4, 5)?.remove(0);
    let z = tangent_project(&x, &gaussian_matrix(20, 4, &mut rng), b)?;
    let z = &z / z.norm();
    let mut worst_h: f64 = 0.0;
    let mut worst_spread: f64 = 1.0;
    let mut report = Vec::new();
    for kind in [
        RetractionKind::Polar,
        RetractionKind::Svd,
        RetractionKind::CholeskyQr,
    ] {
        let far = retract(&x, &(gaussian_matrix(20, 4, &mut rng) * 3.0), b, kind)?;
        worst_h = worst_h.max(constraint_residual(&far, b)?.frobenius_norm);
        let mut ratios = Vec::new();
        for t in [1e-2, 1e-3, 1e-4] {
            let y = retract(&x, &(&z * t), b, kind)?;
            worst_h = worst_h.max(constraint_residual(&y, b)?.frobenius_norm);
            ratios.push((&y - &x - &z * t).norm() / (t * t));
        }
        let hi = ratios.iter().copied().fold(0.0, f64::max);
        let lo = ratios.iter().copied().fold(f64::INFINITY, f64::min);
        worst_spread = worst_spread.max(hi / lo);
        report.push(format!("{kind} {lo:.3}..{hi:.3}"));
    }
    Ok(Outcome::new(
        worst_h <= 1e-10 && worst_spread < 10.0,
        format!(
            "max h = {worst_h:.1e}, ratio ranges [{}]",
            report.join(", ")
        ),
    ))
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn deterministic_gevp() -> Result<Outcome> {
    let start = Instant::now();
    let (n, p) = (200, 20);
    let problem = gevp(n, 100.0, 100.0, 0)?;
    let optimum = problem.oracle(p)?.optimum;
    let x0 = initial_point(&problem, p, 0)?;
    let config = |eta: f64, iters: usize| -> Result<RunConfig> {
        let lc = landing(1.0, 0.5, AscentVariant::PsiB, StepSchedule::constant(eta)?)?;
        let mut cfg = RunConfig::new(lc, iters);
        cfg.record_every = iters;
        cfg.field_tol = 1e-6;
        Ok(cfg)
    };
    let mut best: Option<(f64, f64)> = None;
    for eta in [0.25, 0.5, 1.0, 2.0, 4.0] {
        if let Ok(t) = run_landing_deterministic(&problem, &x0, &config(eta, 3000)?) {
            let fnorm = t.last().map_or(f64::INFINITY, |r| r.field_norm);
            if best.is_none_or(|(_, b)| fnorm < b) {
                best = Some((eta, fnorm));
            }
        }
    }
    let Some((eta, _)) = best else {
        return Ok(Outcome::new(false, "every grid step size diverged"));
    };
    let grid_secs = start.elapsed().as_secs_f64();
    let mut cfg = config(eta, 100_000)?;
    cfg.record_every = 100;
    cfg.max_seconds = Some(60.0 - grid_secs);
    let trace = run_landing_deterministic(&problem, &x0, &cfg)?;
    let hit = trace
        .records
        .iter()
        .find(|r| r.h_norm <= 1e-6 && rel(r.f_val, optimum) <= 1e-4);
    let Some(hit) = hit else {
        let last = trace.last().expect("trace records the final iterate");
        return Ok(Outcome::new(
            false,
            format!(
                "eta = {eta}, not reached after {} iterations: h = {:.1e}, rel gap = {:.1e}",
                last.k,
                last.h_norm,
                rel(last.f_val, optimum)
            ),
        ));
    };
    let secs = grid_secs + hit.time_s;
    Ok(Outcome::new(
        secs < 60.0,
        format!(
            "eta = {eta}, reached at iteration {}: h = {:.1e}, rel gap = {:.1e}, {secs:.1} s with the grid",
            hit.k,
            hit.h_norm,
            rel(hit.f_val, optimum)
        ),
    ))
}

fn safeguard_guarantee() -> Result<Outcome> {
    let epsilon = 0.5;
    let (problem, states) = safe_states(20, 4, epsilon, 1000)?;
    let l_n = problem.b().smoothness_constants(epsilon)?.l_n;
    let mut violations = 0;
    let mut worst: f64 = 0.0;
    for (i, x) in states.iter().enumerate() {
        let omega = [0.1, 1.0, 10.0][i % 3];
        let variant = VARIANTS[i % 2];
        let (_, g) = problem.value_grad(x)?;
        let c = landing_components(x, &g, problem.b(), variant)?;
        let eta = step_size_safeguard(
            c.grad_n_norm,
            c.field_norm(omega),
            c.residual.frobenius_norm,
            l_n,
            omega,
            epsilon,
        )?;
        let next = x - c.field(omega) * eta;
        let h = constraint_residual(&next, problem.b())?.frobenius_norm;
        worst = worst.max(h);
        if h > epsilon {
            violations += 1;
        }
    }
    Ok(Outcome::new(
        violations == 0,
        format!("{violations} violations over 1000 states, max h after step = {worst:.4}"),
    ))
}

fn merit_descent() -> Result<Outcome> {
    let problem = gevp(20, 10.0, 10.0, 0)?;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let x0 = initial_point(&problem, 4, 8)?.remove(0) + gaussian_matrix(20, 4, &mut rng) * 0.02;
    let lc = landing(1.0, 0.5, AscentVariant::PsiB, StepSchedule::constant(1.0)?)?;
    let mut cfg = RunConfig::new(lc, 500);
    cfg.record_merit = true;
    cfg.field_tol = 0.0;
    let trace = run_landing_deterministic(&problem, &[x0], &cfg)?;
    let merits: Vec<f64> = trace.records.iter().filter_map(|r| r.merit).collect();
    let rises = merits.windows(2).filter(|w| w[1] > w[0] + 1e-12).count();
    let clamped = trace
        .records
        .iter()
        .all(|r| r.safeguard.is_none_or(|s| r.eta <= s));
    Ok(Outcome::new(
        rises == 0 && merits.len() == 501 && clamped,
        format!(
            "beta = {:.3e}, {rises} increases over {} steps, merit {:.6} -> {:.6}",
            trace.merit_beta.unwrap_or(f64::NAN),
            merits.len() - 1,
            merits[0],
            merits[merits.len() - 1]
        ),
    ))
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

/// Median objective gap and median `h` of one grid point.
struct GridPoint {
    eta0: f64,
    gap: f64,
    h: f64,
}

impl GridPoint {
    fn score(&self) -> f64 {
        self.gap.max(self.h)
    }
}

fn best_of(points: Vec<GridPoint>) -> Option<GridPoint> {
    points
        .into_iter()
        .filter(|g| g.score().is_finite())
        .min_by(|a, b| a.score().total_cmp(&b.score()))
}

fn stochastic_config(eta0: f64, steps: usize) -> Result<RunConfig> {
    let lc = landing(
        1.0,
        0.5,
        AscentVariant::PsiB,
        StepSchedule::inverse_sqrt(eta0)?,
    )?;
    let mut cfg = RunConfig::new(lc, steps);
    cfg.eval_every = Some(steps);
    Ok(cfg)
}

fn stochastic_gevp() -> Result<Outcome> {
    let start = Instant::now();
    let (n, p, r, steps) = (50, 5, 16, 20_000);
    let seeds = 0..5u64;
    let problems = seeds
        .clone()
        .map(|s| gevp(n, 5.0, 5.0, s).and_then(|g| Ok((g.oracle(p)?.optimum, g))))
        .collect::<Result<Vec<_>>>()?;
    let mut points = Vec::new();
    for eta0 in [0.1, 0.125, 0.15, 0.175] {
        let (mut gaps, mut hs) = (Vec::new(), Vec::new());
        for (s, (optimum, problem)) in seeds.clone().zip(&problems) {
            let x0 = initial_point(problem, p, s)?;
            let mut sampler = GevpGaussianSampler::new(problem, r, 1000 + s)?;
            match run_landing_stochastic(
                problem,
                &mut sampler,
                &x0,
                &stochastic_config(eta0, steps)?,
            ) {
                Ok(t) => {
                    let last = t.last().expect("final record");
                    gaps.push(rel(last.f_val, *optimum));
                    hs.push(last.h_norm);
                }
                Err(_) => {
                    gaps.push(f64::INFINITY);
                    hs.push(f64::INFINITY);
                }
            }
        }
        points.push(GridPoint {
            eta0,
            gap: median(gaps),
            h: median(hs),
        });
    }
    let secs = start.elapsed().as_secs_f64();
    let Some(best) = best_of(points) else {
        return Ok(Outcome::new(false, "every grid step size diverged"));
    };
    Ok(Outcome::new(
        best.h <= 0.05 && best.gap <= 0.05 && secs < 60.0,
        format!(
            "eta0 = {}, median h = {:.4}, median rel gap = {:.4}, {secs:.1} s",
            best.eta0, best.h, best.gap
        ),
    ))
}

fn stochastic_cca() -> Result<Outcome> {
    let (n, samples, latent, p, r, steps) = (50, 10_000, 5, 5, 128, 3000);
    let problems = (0..5u64)
        .map(|s| {
            let c = gen_cca_dataset(n, samples, latent, s, None)?;
            Ok((c.oracle(p)?.optimum, c))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut points = Vec::new();
    for eta0 in [0.01, 0.02, 0.04] {
        let (mut gaps, mut hs) = (Vec::new(), Vec::new());
        for (s, (optimum, problem)) in problems.iter().enumerate() {
            let s = s as u64;
            let x0 = initial_point(problem, p, s)?;
            let mut sampler = CcaSampler::new(problem, r, 100 + s)?;
            match run_landing_stochastic(
                problem,
                &mut sampler,
                &x0,
                &stochastic_config(eta0, steps)?,
            ) {
                Ok(t) => {
                    let last = t.last().expect("final record");
                    gaps.push(rel(last.f_val, *optimum));
                    hs.push(last.h_blocks.iter().copied().fold(0.0, f64::max));
                }
                Err(_) => {
                    gaps.push(f64::INFINITY);
                    hs.push(f64::INFINITY);
                }
            }
        }
        points.push(GridPoint {
            eta0,
            gap: median(gaps),
            h: median(hs),
        });
    }
    let Some(best) = best_of(points) else {
        return Ok(Outcome::new(false, "every grid step size diverged"));
    };
    Ok(Outcome::new(
        best.h <= 0.05 && best.gap <= 0.05,
        format!(
            "eta0 = {}, median worst-block h = {:.4}, median rel gap = {:.4}",
            best.eta0, best.h, best.gap
        ),
    ))
}

fn stochastic_ica() -> Result<Outcome> {
    let start = Instant::now();
    let (n, samples, r, steps) = (6, 20_000, 512, 4000);
    let mut scores = Vec::new();
    let mut hs = Vec::new();
    for s in 0..5u64 {
        let problem = gen_ica_dataset(n, samples, s)?;
        let x0 = initial_point(&problem, n, s)?;
        let mut sampler = IcaSampler::new(&problem, r, 100 + s)?;
        let t =
            run_landing_stochastic(&problem, &mut sampler, &x0, &stochastic_config(0.1, steps)?)?;
        let last = t.last().expect("final record");
        scores.push(last.extra.expect("ICA records the Amari distance"));
        hs.push(last.h_norm);
    }
    let secs = start.elapsed().as_secs_f64();
    let amari = median(scores);
    Ok(Outcome::new(
        amari <= 0.05 && secs < 120.0,
        format!(
            "median Amari distance = {amari:.4}, median h = {:.4}, {secs:.1} s",
            median(hs)
        ),
    ))
}

fn variance_bound_holds() -> Result<Outcome> {
    let (n, p, r, draws, omega, epsilon) = (8, 3, 4, 10_000, 1.0, 0.5);
    let problem = gevp(n, 5.0, 5.0, 9)?;
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let x = safe_state(&problem, p, epsilon, &mut rng)?;
    let b = problem.b();
    let (_, g) = problem.value_grad(&x)?;
    let lc = landing(
        omega,
        epsilon,
        AscentVariant::PsiB,
        StepSchedule::constant(1.0)?,
    )?;
    let exact = landing_field_deterministic(&x, &g, b, &lc)?;
    let mut sampler = GevpGaussianSampler::new(&problem, r, 11)?;
    let (mut field_var, mut sigma_g2, mut sigma_b2, mut p_b) = (0.0, 0.0, 0.0, 0.0);
    let xs = [x.clone()];
    for _ in 0..draws {
        let d = sampler.draw(&xs)?;
        let field =
            landing_field_stochastic(&x, &d.grads[0], &d.b_zeta[0], &d.b_zeta_prime[0], omega)?;
        field_var += (field - &exact).norm_squared();
        sigma_g2 += (&d.grads[0] - &g).norm_squared();
        for est in [&d.b_zeta[0], &d.b_zeta_prime[0]] {
            let dense = est.to_dense();
            sigma_b2 += (&dense - b.matrix()).norm_squared() / 2.0;
            p_b += dense.symmetric_eigenvalues().amax().powi(2) / 2.0;
        }
    }
    let m = draws as f64;
    let (beta_1, beta_n) = b.extreme_eigenvalues();
    let delta = (&g * x.transpose()).singular_values().max().powi(2);
    let inputs = VarianceInputs {
        sigma_g2: sigma_g2 / m,
        sigma_b2: sigma_b2 / m,
        omega,
        epsilon,
        beta_1,
        beta_n,
        p_b: p_b / m,
        delta,
    };
    let bound = variance_bound(&inputs)?.total;
    let observed = field_var / m;
    Ok(Outcome::new(
        observed <= bound,
        format!(
            "Monte Carlo variance {observed:.4e} <= bound {bound:.4e} (ratio {:.2e})",
            observed / bound
        ),
    ))
}

/// Largest relative gap between the analytic gradient and central differences
/// over `points` random points.
fn fd_gap(
    problem: &dyn Problem,
    shapes: &[(usize, usize)],
    points: usize,
    seed: u64,
) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let t = 1e-5;
    let mut worst: f64 = 0.0;
    for _ in 0..points {
        let xs: Vec<Mat> = shapes
            .iter()
            .map(|&(n, p)| gaussian_matrix(n, p, &mut rng))
            .collect();
        let (_, grads) = problem.value_grad(&xs)?;
        let (mut num, mut den) = (0.0, 0.0);
        for (blk, g) in grads.iter().enumerate() {
            let mut fd = Mat::zeros(g.nrows(), g.ncols());
            for idx in 0..g.len() {
                let mut plus = xs.clone();
                plus[blk][idx] += t;
                let mut minus = xs.clone();
                minus[blk][idx] -= t;
                fd[idx] =
                    (problem.value_grad(&plus)?.0 - problem.value_grad(&minus)?.0) / (2.0 * t);
            }
            num += (&fd - g).norm_squared();
            den += g.norm_squared();
        }
        worst = worst.max((num / den).sqrt());
    }
    Ok(worst)
}

fn gradient_checks() -> Result<Outcome> {
    let g = gevp(10, 10.0, 10.0, 12)?;
    let c = gen_cca_dataset(8, 500, 3, 13, None)?;
    let i = gen_ica_dataset(5, 1000, 14)?;
    let gaps = [
        fd_gap(&g, &[(10, 3)], 10, 15)?,
        fd_gap(&c, &[(8, 3), (8, 3)], 10, 16)?,
        fd_gap(&i, &[(5, 5)], 10, 17)?,
    ];
    let worst = gaps.iter().copied().fold(0.0, f64::max);
    Ok(Outcome::new(
        worst <= 1e-6,
        format!(
            "max relative gap gevp {:.1e}, cca {:.1e}, ica {:.1e}",
            gaps[0], gaps[1], gaps[2]
        ),
    ))
}
