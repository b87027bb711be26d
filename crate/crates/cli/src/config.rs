use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use gstiefel_landing::landing::{AscentVariant, StepKind};
use gstiefel_landing::manifold::RetractionKind;
use serde::Serialize;

pub const MNIST_ENV: &str = "LANDING_MNIST_PATH";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    Gevp,
    Cca,
    Ica,
}

impl FromStr for Experiment {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gevp" => Ok(Self::Gevp),
            "cca" => Ok(Self::Cca),
            "ica" => Ok(Self::Ica),
            other => bail!("unknown experiment `{other}` (expected gevp, cca or ica)"),
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Gevp => "gevp",
            Self::Cca => "cca",
            Self::Ica => "ica",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    LandingPsiB,
    LandingPsiBr,
    Rgd,
    RsgdRolling,
}

impl Method {
    pub fn variant(self) -> Option<AscentVariant> {
        match self {
            Self::LandingPsiB => Some(AscentVariant::PsiB),
            Self::LandingPsiBr => Some(AscentVariant::PsiBRiemannian),
            Self::Rgd | Self::RsgdRolling => None,
        }
    }
}

impl FromStr for Method {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "landing_psi_b" => Ok(Self::LandingPsiB),
            "landing_psi_br" => Ok(Self::LandingPsiBr),
            "rgd" => Ok(Self::Rgd),
            "rsgd_rolling" => Ok(Self::RsgdRolling),
            other => bail!("unknown method `{other}` (expected landing_psi_b, landing_psi_br, rgd or rsgd_rolling)"),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::LandingPsiB => "landing_psi_b",
            Self::LandingPsiBr => "landing_psi_br",
            Self::Rgd => "rgd",
            Self::RsgdRolling => "rsgd_rolling",
        })
    }
}

/// Every config key with its help line. Keys double as `--key` flags.
pub const KEYS: &[(&str, &str)] = &[
    (
        "experiment",
        "gevp, cca or ica (set by the subcommand; used by sweep)",
    ),
    ("n", "ambient dimension (per view for cca)"),
    ("p", "number of columns of X"),
    ("samples", "number of samples N (cca, ica)"),
    ("batch", "minibatch size r"),
    ("latent", "shared latent directions in synthetic cca"),
    ("kappa_a", "condition number of A (gevp)"),
    ("kappa_b", "condition number of B (gevp)"),
    (
        "method",
        "landing_psi_b, landing_psi_br, rgd or rsgd_rolling",
    ),
    (
        "stochastic",
        "true for minibatch runs (default: false for gevp, true otherwise)",
    ),
    ("eta", "step size, or eta0 of the schedule"),
    ("schedule", "constant or inverse_sqrt"),
    ("omega", "weight of the normal term"),
    ("epsilon", "safe-region radius on ||h||"),
    ("retraction", "polar, svd or cholesky_qr (baselines)"),
    ("max_iters", "iteration budget"),
    ("max_seconds", "wall-clock budget"),
    ("seed", "base random seed"),
    ("record_every", "record cadence of deterministic runs"),
    (
        "eval_every",
        "full-data evaluation cadence of stochastic runs (default: one epoch)",
    ),
    (
        "record_merit",
        "record the Fletcher merit (deterministic landing)",
    ),
    ("merit_beta", "fixed merit penalty (default: searched)"),
    ("safeguard", "clamp steps by the safe-region safeguard"),
    ("field_tol", "stop when the field norm drops below this"),
    ("out", "metrics CSV path"),
    ("meta", "metadata JSON path (default: CSV path with .json)"),
    (
        "mnist_path",
        "IDX image file for split-MNIST cca (env LANDING_MNIST_PATH overrides)",
    ),
    ("ridge", "cca ridge added to both view covariances"),
    ("grid_eta", "sweep: comma-separated step multipliers"),
    ("grid_omega", "sweep: comma-separated omega multipliers"),
    ("out_dir", "sweep: output directory"),
];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub n: Option<usize>,
    pub p: Option<usize>,
    pub samples: Option<usize>,
    pub batch: Option<usize>,
    pub latent: usize,
    pub kappa_a: f64,
    pub kappa_b: f64,
    pub method: Method,
    pub stochastic: Option<bool>,
    pub eta: Option<f64>,
    pub schedule: Option<StepKind>,
    pub omega: Option<f64>,
    pub epsilon: f64,
    pub retraction: RetractionKind,
    pub max_iters: Option<usize>,
    pub max_seconds: Option<f64>,
    pub seed: u64,
    pub record_every: usize,
    pub eval_every: Option<usize>,
    pub record_merit: bool,
    pub merit_beta: Option<f64>,
    pub safeguard: bool,
    pub field_tol: f64,
    pub out: PathBuf,
    pub meta: Option<PathBuf>,
    pub mnist_path: Option<PathBuf>,
    pub ridge: Option<f64>,
    pub grid_eta: Vec<f64>,
    pub grid_omega: Vec<f64>,
    pub out_dir: PathBuf,
}

impl ExperimentConfig {
    pub fn new(experiment: Experiment) -> Self {
        Self {
            experiment,
            n: None,
            p: None,
            samples: None,
            batch: None,
            latent: 5,
            kappa_a: 10.0,
            kappa_b: 10.0,
            method: Method::LandingPsiB,
            stochastic: None,
            eta: None,
            schedule: None,
            omega: None,
            epsilon: 0.5,
            retraction: RetractionKind::Polar,
            max_iters: None,
            max_seconds: None,
            seed: 0,
            record_every: 1,
            eval_every: None,
            record_merit: false,
            merit_beta: None,
            safeguard: true,
            field_tol: 1e-10,
            out: PathBuf::from("metrics.csv"),
            meta: None,
            mnist_path: None,
            ridge: None,
            grid_eta: vec![0.25, 0.5, 1.0, 2.0, 4.0, 8.0],
            grid_omega: vec![1.0],
            out_dir: PathBuf::from("sweep"),
        }
    }

    /// Sets one key from its string form. An empty value clears optional keys.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        let ctx = || format!("bad value `{v}` for `{key}`");
        match key {
            "experiment" => self.experiment = v.parse()?,
            "n" => self.n = opt(v).with_context(ctx)?,
            "p" => self.p = opt(v).with_context(ctx)?,
            "samples" => self.samples = opt(v).with_context(ctx)?,
            "batch" => self.batch = opt(v).with_context(ctx)?,
            "latent" => self.latent = v.parse().with_context(ctx)?,
            "kappa_a" => self.kappa_a = v.parse().with_context(ctx)?,
            "kappa_b" => self.kappa_b = v.parse().with_context(ctx)?,
            "method" => self.method = v.parse()?,
            "stochastic" => self.stochastic = opt(v).with_context(ctx)?,
            "eta" => self.eta = opt(v).with_context(ctx)?,
            "schedule" => self.schedule = opt_lib(v)?,
            "omega" => self.omega = opt(v).with_context(ctx)?,
            "epsilon" => self.epsilon = v.parse().with_context(ctx)?,
            "retraction" => self.retraction = v.parse().map_err(|e| anyhow!("{e}"))?,
            "max_iters" => self.max_iters = opt(v).with_context(ctx)?,
            "max_seconds" => self.max_seconds = opt(v).with_context(ctx)?,
            "seed" => self.seed = v.parse().with_context(ctx)?,
            "record_every" => self.record_every = v.parse().with_context(ctx)?,
            "eval_every" => self.eval_every = opt(v).with_context(ctx)?,
            "record_merit" => self.record_merit = v.parse().with_context(ctx)?,
            "merit_beta" => self.merit_beta = opt(v).with_context(ctx)?,
            "safeguard" => self.safeguard = v.parse().with_context(ctx)?,
            "field_tol" => self.field_tol = v.parse().with_context(ctx)?,
            "out" => self.out = PathBuf::from(v),
            "meta" => self.meta = (!v.is_empty()).then(|| PathBuf::from(v)),
            "mnist_path" => self.mnist_path = (!v.is_empty()).then(|| PathBuf::from(v)),
            "ridge" => self.ridge = opt(v).with_context(ctx)?,
            "grid_eta" => self.grid_eta = list(v).with_context(ctx)?,
            "grid_omega" => self.grid_omega = list(v).with_context(ctx)?,
            "out_dir" => self.out_dir = PathBuf::from(v),
            other => bail!("unknown config key `{other}`"),
        }
        Ok(())
    }

    /// Applies a flat `key = value` file; `#` starts a comment.
    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        self.apply_str(&text)
            .with_context(|| format!("in config file {}", path.display()))
    }

    pub fn apply_str(&mut self, text: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("line {}: expected key = value", i + 1))?;
            self.set(k.trim(), v)
                .with_context(|| format!("line {}", i + 1))?;
        }
        Ok(())
    }

    /// Flat `key = value` lines for every key; unset optional keys are empty.
    pub fn to_flat(&self) -> String {
        let mut s = String::new();
        for (key, _) in KEYS {
            s.push_str(&format!("{key} = {}\n", self.get(key)));
        }
        s
    }

    pub fn get(&self, key: &str) -> String {
        fn o<T: ToString>(v: &Option<T>) -> String {
            v.as_ref().map(T::to_string).unwrap_or_default()
        }
        fn l(v: &[f64]) -> String {
            v.iter().map(f64::to_string).collect::<Vec<_>>().join(",")
        }
        match key {
            "experiment" => self.experiment.to_string(),
            "n" => o(&self.n),
            "p" => o(&self.p),
            "samples" => o(&self.samples),
            "batch" => o(&self.batch),
            "latent" => self.latent.to_string(),
            "kappa_a" => self.kappa_a.to_string(),
            "kappa_b" => self.kappa_b.to_string(),
            "method" => self.method.to_string(),
            "stochastic" => o(&self.stochastic),
            "eta" => o(&self.eta),
            "schedule" => o(&self.schedule),
            "omega" => o(&self.omega),
            "epsilon" => self.epsilon.to_string(),
            "retraction" => self.retraction.to_string(),
            "max_iters" => o(&self.max_iters),
            "max_seconds" => o(&self.max_seconds),
            "seed" => self.seed.to_string(),
            "record_every" => self.record_every.to_string(),
            "eval_every" => o(&self.eval_every),
            "record_merit" => self.record_merit.to_string(),
            "merit_beta" => o(&self.merit_beta),
            "safeguard" => self.safeguard.to_string(),
            "field_tol" => self.field_tol.to_string(),
            "out" => self.out.display().to_string(),
            "meta" => o(&self.meta.as_ref().map(|p| p.display().to_string())),
            "mnist_path" => o(&self.mnist_path.as_ref().map(|p| p.display().to_string())),
            "ridge" => o(&self.ridge),
            "grid_eta" => l(&self.grid_eta),
            "grid_omega" => l(&self.grid_omega),
            "out_dir" => self.out_dir.display().to_string(),
            _ => String::new(),
        }
    }

    /// Fills every default that depends on the experiment and method.
    pub fn resolve(&self) -> Result<ExperimentConfig> {
        let mut c = self.clone();
        let stochastic = *c.stochastic.get_or_insert(c.experiment != Experiment::Gevp);
        if c.method == Method::RsgdRolling && !stochastic {
            bail!("rsgd_rolling needs stochastic = true");
        }
        let (n, p, samples, batch) = match c.experiment {
            Experiment::Gevp => (20, 4, 0, 16),
            Experiment::Cca => (50, 5, 10_000, 128),
            Experiment::Ica => (6, c.n.unwrap_or(6), 20_000, 512),
        };
        c.n.get_or_insert(n);
        c.p.get_or_insert(p);
        c.samples.get_or_insert(samples);
        c.batch.get_or_insert(batch);
        let (eta, omega) = default_step(c.experiment, c.method, stochastic);
        c.eta.get_or_insert(eta);
        c.omega.get_or_insert(omega);
        c.schedule.get_or_insert(if stochastic {
            StepKind::InverseSqrt
        } else {
            StepKind::Constant
        });
        if c.max_iters.is_none() && c.max_seconds.is_none() {
            c.max_iters = Some(5000);
        }
        if c.experiment == Experiment::Cca {
            if let Ok(path) = std::env::var(MNIST_ENV) {
                if !path.is_empty() {
                    c.mnist_path = Some(PathBuf::from(path));
                }
            }
        }
        c.validate()?;
        Ok(c)
    }

    fn validate(&self) -> Result<()> {
        let (n, p) = (self.n.unwrap_or(0), self.p.unwrap_or(0));
        if n == 0 || p == 0 || p > n {
            bail!("need 0 < p <= n, got n = {n}, p = {p}");
        }
        if self.batch == Some(0) {
            bail!("batch must be positive");
        }
        if !(self.kappa_a >= 1.0 && self.kappa_b >= 1.0) {
            bail!("condition numbers must be at least 1");
        }
        if self
            .grid_eta
            .iter()
            .chain(&self.grid_omega)
            .any(|m| !(*m > 0.0))
        {
            bail!("grid multipliers must be positive");
        }
        Ok(())
    }

    pub fn meta_path(&self) -> PathBuf {
        self.meta
            .clone()
            .unwrap_or_else(|| self.out.with_extension("json"))
    }
}

/// Step and normal weight used when the config leaves them unset.
///
/// Tuned by grid search at the default desk-scale sizes.
pub fn default_step(experiment: Experiment, method: Method, stochastic: bool) -> (f64, f64) {
    match (stochastic, method) {
        (false, Method::LandingPsiB) => (1.0, 1.0),
        (false, _) => (0.1, 1.0),
        (true, _) => match experiment {
            Experiment::Gevp => (0.15, 1.0),
            Experiment::Cca => (0.02, 1.0),
            Experiment::Ica => (0.1, 1.0),
        },
    }
}

fn opt<T: FromStr>(v: &str) -> std::result::Result<Option<T>, T::Err> {
    if v.is_empty() {
        Ok(None)
    } else {
        v.parse().map(Some)
    }
}

fn opt_lib<T: FromStr>(v: &str) -> Result<Option<T>>
where
    T::Err: fmt::Display,
{
    opt(v).map_err(|e| anyhow!("{e}"))
}

fn list(v: &str) -> Result<Vec<f64>> {
    if v.is_empty() {
        return Ok(Vec::new());
    }
    v.split(',').map(|s| Ok(s.trim().parse::<f64>()?)).collect()
}
