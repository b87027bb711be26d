use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{Context, Result};
use gstiefel_landing::data::{
    gen_cca_dataset, gen_ica_dataset, gen_spd_pair, load_mnist_split, SpectrumKind, SpectrumSpec,
};
use gstiefel_landing::landing::{AscentVariant, LandingConfig, StepSchedule};
use gstiefel_landing::manifold::SmoothnessConstants;
use gstiefel_landing::optimize::{
    initial_point, run_landing_deterministic, run_landing_stochastic, run_riemannian_baseline,
    BSource, IterateTrace, RunConfig, RunStatus, Sampler,
};
use gstiefel_landing::problems::{
    CcaProblem, CcaSampler, GevpGaussianSampler, GevpProblem, IcaProblem, IcaSampler, Problem,
};
use serde::Serialize;

use crate::config::{Experiment, ExperimentConfig, Method};

pub const CSV_COLUMNS: [&str; 8] = [
    "iter", "time_s", "f_val", "h_norm", "psi_norm", "eta", "merit", "extra",
];

pub enum Instance {
    Gevp(GevpProblem),
    Cca(CcaProblem),
    Ica(IcaProblem),
}

impl Instance {
    /// Builds the problem data from the resolved config and its seed.
    pub fn build(cfg: &ExperimentConfig) -> Result<Self> {
        let n = cfg.n.expect("resolved");
        Ok(match cfg.experiment {
            Experiment::Gevp => {
                let sa = SpectrumSpec::new(SpectrumKind::Equidistant, cfg.kappa_a, n)?;
                let sb = SpectrumSpec::new(SpectrumKind::Exponential, cfg.kappa_b, n)?;
                let (a, b) = gen_spd_pair(&sa, &sb, cfg.seed)?;
                Self::Gevp(GevpProblem::new(a, b)?)
            }
            Experiment::Cca => match &cfg.mnist_path {
                Some(path) => Self::Cca(
                    load_mnist_split(path, cfg.ridge)
                        .with_context(|| format!("loading {}", path.display()))?,
                ),
                None => Self::Cca(gen_cca_dataset(
                    n,
                    cfg.samples.expect("resolved"),
                    cfg.latent,
                    cfg.seed,
                    cfg.ridge,
                )?),
            },
            Experiment::Ica => Self::Ica(gen_ica_dataset(
                n,
                cfg.samples.expect("resolved"),
                cfg.seed,
            )?),
        })
    }

    pub fn problem(&self) -> &dyn Problem {
        match self {
            Self::Gevp(p) => p,
            Self::Cca(p) => p,
            Self::Ica(p) => p,
        }
    }

    pub fn sampler(&self, batch: usize, seed: u64) -> Result<Box<dyn Sampler>> {
        Ok(match self {
            Self::Gevp(p) => Box::new(GevpGaussianSampler::new(p, batch, seed)?),
            Self::Cca(p) => Box::new(CcaSampler::new(p, batch, seed)?),
            Self::Ica(p) => Box::new(IcaSampler::new(p, batch, seed)?),
        })
    }

    pub fn oracle(&self, p: usize) -> Option<f64> {
        match self {
            Self::Gevp(g) => g.oracle(p).ok().map(|s| s.optimum),
            Self::Cca(c) => c.oracle(p).ok().map(|s| s.optimum),
            Self::Ica(_) => None,
        }
    }

    pub fn ridge(&self) -> Option<f64> {
        match self {
            Self::Cca(c) => Some(c.ridge()),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub status: RunStatus,
    pub iterations: usize,
    pub final_f: f64,
    pub final_h: f64,
    pub best_f: f64,
}

impl RunSummary {
    fn of(trace: &IterateTrace) -> Self {
        let last = trace.last();
        Self {
            status: trace.status,
            iterations: trace.iterations(),
            final_f: last.map_or(f64::NAN, |r| r.f_val),
            final_h: last.map_or(f64::NAN, |r| r.h_norm),
            best_f: trace
                .records
                .iter()
                .map(|r| r.f_val)
                .fold(f64::INFINITY, f64::min),
        }
    }
}

#[derive(Serialize)]
struct Metadata<'a> {
    version: &'static str,
    config: &'a ExperimentConfig,
    flat_config: String,
    constants: Vec<Option<SmoothnessConstants>>,
    merit_beta: Option<f64>,
    ridge: Option<f64>,
    oracle_optimum: Option<f64>,
    status: RunStatus,
    safe_region_violations: usize,
    final_h_blocks: Vec<f64>,
    error: Option<String>,
}

fn landing_config(cfg: &ExperimentConfig, variant: AscentVariant) -> Result<LandingConfig> {
    let step = StepSchedule::new(cfg.schedule.expect("resolved"), cfg.eta.expect("resolved"))?;
    Ok(LandingConfig::new(
        cfg.omega.expect("resolved"),
        cfg.epsilon,
        variant,
        step,
    )?)
}

fn run_config(cfg: &ExperimentConfig) -> Result<RunConfig> {
    let variant = cfg.method.variant().unwrap_or(AscentVariant::PsiB);
    let mut rc = RunConfig::new(landing_config(cfg, variant)?, 0);
    rc.max_iters = cfg.max_iters;
    rc.max_seconds = cfg.max_seconds;
    rc.seed = cfg.seed;
    rc.record_merit = cfg.record_merit;
    rc.merit_beta = cfg.merit_beta;
    rc.safeguard_check = cfg.safeguard;
    rc.record_every = cfg.record_every;
    rc.eval_every = cfg.eval_every;
    rc.field_tol = cfg.field_tol;
    Ok(rc)
}

/// Runs one resolved config on a prebuilt instance. `stream_seed` seeds the sampler.
pub fn run_on(
    instance: &Instance,
    cfg: &ExperimentConfig,
    stream_seed: u64,
) -> Result<IterateTrace> {
    let problem = instance.problem();
    let rc = run_config(cfg)?;
    let x0 = initial_point(problem, cfg.p.expect("resolved"), cfg.seed)?;
    let stochastic = cfg.stochastic.expect("resolved");
    let batch = cfg.batch.expect("resolved");
    let result = match (cfg.method, stochastic) {
        (Method::LandingPsiB | Method::LandingPsiBr, false) => {
            run_landing_deterministic(problem, &x0, &rc)
        }
        (Method::LandingPsiB | Method::LandingPsiBr, true) => {
            let mut s = instance.sampler(batch, stream_seed)?;
            run_landing_stochastic(problem, s.as_mut(), &x0, &rc)
        }
        (Method::Rgd, false) => {
            run_riemannian_baseline(problem, BSource::Fixed, &x0, &rc, cfg.retraction)
        }
        (Method::Rgd | Method::RsgdRolling, true) => {
            let mut s = instance.sampler(batch, stream_seed)?;
            run_riemannian_baseline(
                problem,
                BSource::RollingAverage(s.as_mut()),
                &x0,
                &rc,
                cfg.retraction,
            )
        }
        (Method::RsgdRolling, false) => unreachable!("rejected by resolve"),
    };
    Ok(result?)
}

/// Writes the metrics CSV. Multi-block problems get `h_block_i` columns.
pub fn write_csv(path: &Path, trace: &IterateTrace) -> Result<()> {
    let blocks = trace.records.first().map_or(0, |r| r.h_blocks.len());
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    let mut header: Vec<String> = CSV_COLUMNS.iter().map(|s| s.to_string()).collect();
    if blocks > 1 {
        header.extend((0..blocks).map(|i| format!("h_block_{i}")));
    }
    w.write_record(&header)?;
    let o = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in &trace.records {
        let mut row = vec![
            r.k.to_string(),
            r.time_s.to_string(),
            r.f_val.to_string(),
            r.h_norm.to_string(),
            r.psi_norm.to_string(),
            r.eta.to_string(),
            o(r.merit),
            o(r.extra),
        ];
        if blocks > 1 {
            row.extend(r.h_blocks.iter().map(f64::to_string));
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

fn write_meta(
    path: &Path,
    cfg: &ExperimentConfig,
    instance: &Instance,
    outcome: &std::result::Result<IterateTrace, String>,
) -> Result<()> {
    let problem = instance.problem();
    let constants = (0..problem.num_blocks())
        .map(|i| problem.constraint(i).smoothness_constants(cfg.epsilon).ok())
        .collect();
    let (merit_beta, status, violations, h_blocks, error) = match outcome {
        Ok(t) => (
            t.merit_beta,
            t.status,
            t.safe_region_violations,
            t.last().map(|r| r.h_blocks.clone()).unwrap_or_default(),
            None,
        ),
        Err(e) => (None, RunStatus::Diverged, 0, Vec::new(), Some(e.clone())),
    };
    let meta = Metadata {
        version: env!("CARGO_PKG_VERSION"),
        config: cfg,
        flat_config: cfg.to_flat(),
        constants,
        merit_beta,
        ridge: instance.ridge(),
        oracle_optimum: instance.oracle(cfg.p.expect("resolved")),
        status,
        safe_region_violations: violations,
        final_h_blocks: h_blocks,
        error,
    };
    let mut w =
        BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
    serde_json::to_writer_pretty(&mut w, &meta)?;
    writeln!(w)?;
    Ok(())
}

/// Runs a resolved config and writes its CSV and metadata.
///
/// Runs that abort mid-way (divergence, leaving the safe region) still write
/// the partial trace and record the error in the metadata.
pub fn run_and_write(
    instance: &Instance,
    cfg: &ExperimentConfig,
    stream_seed: u64,
) -> Result<RunSummary> {
    let outcome = match run_on(instance, cfg, stream_seed) {
        Ok(t) => Ok(t),
        Err(e) => {
            match e.downcast::<gstiefel_landing::Error>() {
                Ok(gstiefel_landing::Error::Diverged { trace, .. }) => {
                    write_csv(&cfg.out, &trace)?;
                    Err(format!("diverged after {} iterations", trace.iterations()))
                }
                Ok(gstiefel_landing::Error::LeftSafeRegion {
                    iteration,
                    h_norm,
                    epsilon,
                    trace,
                }) => {
                    write_csv(&cfg.out, &trace)?;
                    Err(format!("left the safe region at iteration {iteration}: ||h|| = {h_norm} > {epsilon}"))
                }
                Ok(other) => return Err(other.into()),
                Err(other) => return Err(other),
            }
        }
    };
    if let Ok(t) = &outcome {
        write_csv(&cfg.out, t)?;
    }
    write_meta(&cfg.meta_path(), cfg, instance, &outcome)?;
    match outcome {
        Ok(t) => Ok(RunSummary::of(&t)),
        Err(e) => anyhow::bail!(e),
    }
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunSummary> {
    let cfg = cfg.resolve()?;
    let instance = Instance::build(&cfg)?;
    run_and_write(&instance, &cfg, stream_seed(cfg.seed, 0))
}

/// Sampler seed of sweep point `index`; the data and start point keep the base seed.
pub fn stream_seed(seed: u64, index: u64) -> u64 {
    seed.wrapping_add(1).wrapping_add(index)
}
