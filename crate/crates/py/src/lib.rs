//! Python module `pygstiefel`. Matrices cross the boundary as lists of rows.

use gstiefel_landing::data::{
    gen_cca_dataset, gen_ica_dataset, gen_spd_pair, SpectrumKind, SpectrumSpec,
};
use gstiefel_landing::landing::{self, AscentVariant, StepKind, StepSchedule};
use gstiefel_landing::manifold::{self, RetractionKind};
use gstiefel_landing::optimize::{
    self, run_landing_deterministic, run_landing_stochastic, run_riemannian_baseline, BSource,
    IterateTrace, RunConfig, Sampler,
};
use gstiefel_landing::problems::{
    self, CcaProblem, CcaSampler, GevpGaussianSampler, GevpProblem, IcaProblem, IcaSampler, Problem,
};
use gstiefel_landing::{Mat, SpdMatrix};
use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

create_exception!(pygstiefel, LandingError, PyException);

fn err(e: gstiefel_landing::Error) -> PyErr {
    LandingError::new_err(e.to_string())
}

type Rows = Vec<Vec<f64>>;

fn to_mat(rows: &Rows) -> PyResult<Mat> {
    let r = rows.len();
    let c = rows.first().map_or(0, Vec::len);
    if r == 0 || c == 0 || rows.iter().any(|row| row.len() != c) {
        return Err(PyValueError::new_err(
            "expected a non-empty rectangular list of rows",
        ));
    }
    Ok(Mat::from_fn(r, c, |i, j| rows[i][j]))
}

fn to_rows(m: &Mat) -> Rows {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn parse<T: std::str::FromStr<Err = gstiefel_landing::Error>>(s: &str) -> PyResult<T> {
    s.parse().map_err(err)
}

enum Instance {
    Gevp(GevpProblem),
    Cca(CcaProblem),
    Ica(IcaProblem),
}

impl Instance {
    fn problem(&self) -> &dyn Problem {
        match self {
            Self::Gevp(p) => p,
            Self::Cca(p) => p,
            Self::Ica(p) => p,
        }
    }

    fn sampler(&self, batch: usize, seed: u64) -> gstiefel_landing::Result<Box<dyn Sampler>> {
        Ok(match self {
            Self::Gevp(p) => Box::new(GevpGaussianSampler::new(p, batch, seed)?),
            Self::Cca(p) => Box::new(CcaSampler::new(p, batch, seed)?),
            Self::Ica(p) => Box::new(IcaSampler::new(p, batch, seed)?),
        })
    }
}

/// A problem on one or more generalized Stiefel blocks.
#[pyclass(frozen, name = "Problem")]
struct ProblemHandle {
    inner: Instance,
}

#[pymethods]
impl ProblemHandle {
    /// Generalized eigenvalue problem with equidistant spectrum of `A` and
    /// exponentially decaying spectrum of `B`.
    #[staticmethod]
    #[pyo3(signature = (n, kappa_a=10.0, kappa_b=10.0, seed=0))]
    fn gevp(n: usize, kappa_a: f64, kappa_b: f64, seed: u64) -> PyResult<Self> {
        let sa = SpectrumSpec::new(SpectrumKind::Equidistant, kappa_a, n).map_err(err)?;
        let sb = SpectrumSpec::new(SpectrumKind::Exponential, kappa_b, n).map_err(err)?;
        let (a, b) = gen_spd_pair(&sa, &sb, seed).map_err(err)?;
        Ok(Self {
            inner: Instance::Gevp(GevpProblem::new(a, b).map_err(err)?),
        })
    }

    /// GEVP from explicit matrices.
    #[staticmethod]
    fn gevp_from(a: Rows, b: Rows) -> PyResult<Self> {
        let b = SpdMatrix::new(to_mat(&b)?).map_err(err)?;
        Ok(Self {
            inner: Instance::Gevp(GevpProblem::new(to_mat(&a)?, b).map_err(err)?),
        })
    }

    /// Synthetic two-view CCA.
    #[staticmethod]
    #[pyo3(signature = (n, samples, latent=5, seed=0, ridge=None))]
    fn cca(
        n: usize,
        samples: usize,
        latent: usize,
        seed: u64,
        ridge: Option<f64>,
    ) -> PyResult<Self> {
        Ok(Self {
            inner: Instance::Cca(gen_cca_dataset(n, samples, latent, seed, ridge).map_err(err)?),
        })
    }

    /// Split-MNIST CCA from an IDX image file.
    #[staticmethod]
    #[pyo3(signature = (path, ridge=None))]
    fn cca_mnist(path: &str, ridge: Option<f64>) -> PyResult<Self> {
        Ok(Self {
            inner: Instance::Cca(
                gstiefel_landing::data::load_mnist_split(path, ridge).map_err(err)?,
            ),
        })
    }

    /// Synthetic ICA with Laplace sources and a random orthogonal mixing.
    #[staticmethod]
    #[pyo3(signature = (n, samples, seed=0))]
    fn ica(n: usize, samples: usize, seed: u64) -> PyResult<Self> {
        Ok(Self {
            inner: Instance::Ica(gen_ica_dataset(n, samples, seed).map_err(err)?),
        })
    }

    #[getter]
    fn name(&self) -> &'static str {
        self.inner.problem().name()
    }

    #[getter]
    fn num_blocks(&self) -> usize {
        self.inner.problem().num_blocks()
    }

    fn constraint(&self, block: usize) -> PyResult<Rows> {
        let p = self.inner.problem();
        if block >= p.num_blocks() {
            return Err(PyValueError::new_err(format!("block {block} out of range")));
        }
        Ok(to_rows(p.constraint(block).matrix()))
    }

    /// `(f, [grad per block])`.
    fn value_grad(&self, xs: Vec<Rows>) -> PyResult<(f64, Vec<Rows>)> {
        let xs = xs.iter().map(to_mat).collect::<PyResult<Vec<_>>>()?;
        let (f, g) = self.inner.problem().value_grad(&xs).map_err(err)?;
        Ok((f, g.iter().map(to_rows).collect()))
    }

    /// Optimal value for `p` columns, when a dense oracle exists.
    fn oracle(&self, p: usize) -> PyResult<Option<f64>> {
        Ok(match &self.inner {
            Instance::Gevp(g) => Some(g.oracle(p).map_err(err)?.optimum),
            Instance::Cca(c) => Some(c.oracle(p).map_err(err)?.optimum),
            Instance::Ica(_) => None,
        })
    }

    /// Problem-specific score, e.g. the Amari distance for ICA.
    fn extra(&self, xs: Vec<Rows>) -> PyResult<Option<f64>> {
        let xs = xs.iter().map(to_mat).collect::<PyResult<Vec<_>>>()?;
        Ok(self.inner.problem().extra(&xs))
    }

    #[pyo3(signature = (p, seed=0))]
    fn initial_point(&self, p: usize, seed: u64) -> PyResult<Vec<Rows>> {
        let xs = optimize::initial_point(self.inner.problem(), p, seed).map_err(err)?;
        Ok(xs.iter().map(to_rows).collect())
    }

    fn __repr__(&self) -> String {
        format!("Problem({})", self.name())
    }
}

/// Step schedule, normal weight and safe-region radius of a landing run.
#[pyclass(frozen, get_all, skip_from_py_object)]
#[derive(Clone)]
struct LandingConfig {
    omega: f64,
    epsilon: f64,
    variant: String,
    eta: f64,
    schedule: String,
}

impl LandingConfig {
    fn to_core(&self) -> PyResult<landing::LandingConfig> {
        let kind: StepKind = parse(&self.schedule)?;
        let step = StepSchedule::new(kind, self.eta).map_err(err)?;
        landing::LandingConfig::new(
            self.omega,
            self.epsilon,
            parse::<AscentVariant>(&self.variant)?,
            step,
        )
        .map_err(err)
    }
}

#[pymethods]
impl LandingConfig {
    #[new]
    #[pyo3(signature = (eta=1.0, omega=1.0, epsilon=0.5, variant="psi_b", schedule="constant"))]
    fn new(eta: f64, omega: f64, epsilon: f64, variant: &str, schedule: &str) -> PyResult<Self> {
        let cfg = Self {
            omega,
            epsilon,
            variant: variant.to_string(),
            eta,
            schedule: schedule.to_string(),
        };
        cfg.to_core()?;
        Ok(cfg)
    }

    fn __repr__(&self) -> String {
        format!(
            "LandingConfig(eta={}, omega={}, epsilon={}, variant='{}', schedule='{}')",
            self.eta, self.omega, self.epsilon, self.variant, self.schedule
        )
    }
}

/// Recorded iterates of one run.
#[pyclass(frozen)]
struct Trace {
    inner: IterateTrace,
}

#[pymethods]
impl Trace {
    #[getter]
    fn status(&self) -> String {
        format!("{:?}", self.inner.status)
    }

    #[getter]
    fn merit_beta(&self) -> Option<f64> {
        self.inner.merit_beta
    }

    #[getter]
    fn safe_region_violations(&self) -> usize {
        self.inner.safe_region_violations
    }

    #[getter]
    fn iterations(&self) -> usize {
        self.inner.iterations()
    }

    #[getter]
    fn final_point(&self) -> Vec<Rows> {
        self.inner.final_point.iter().map(to_rows).collect()
    }

    /// One dict per recorded iterate.
    fn records<'py>(&self, py: Python<'py>) -> PyResult<Vec<Bound<'py, PyDict>>> {
        self.inner
            .records
            .iter()
            .map(|r| {
                let d = PyDict::new(py);
                d.set_item("iter", r.k)?;
                d.set_item("time_s", r.time_s)?;
                d.set_item("f_val", r.f_val)?;
                d.set_item("h_norm", r.h_norm)?;
                d.set_item("psi_norm", r.psi_norm)?;
                d.set_item("field_norm", r.field_norm)?;
                d.set_item("eta", r.eta)?;
                d.set_item("safeguard", r.safeguard)?;
                d.set_item("merit", r.merit)?;
                d.set_item("extra", r.extra)?;
                d.set_item("h_blocks", r.h_blocks.clone())?;
                Ok(d)
            })
            .collect()
    }

    fn __len__(&self) -> usize {
        self.inner.records.len()
    }

    fn __repr__(&self) -> String {
        format!(
            "Trace(status={}, records={})",
            self.status(),
            self.inner.records.len()
        )
    }
}

fn run_config(
    cfg: &LandingConfig,
    max_iters: usize,
    max_seconds: Option<f64>,
    record_every: usize,
) -> PyResult<RunConfig> {
    let mut rc = RunConfig::new(cfg.to_core()?, max_iters);
    rc.max_seconds = max_seconds;
    rc.record_every = record_every;
    Ok(rc)
}

fn start(
    problem: &ProblemHandle,
    x0: Option<Vec<Rows>>,
    p: Option<usize>,
    seed: u64,
) -> PyResult<Vec<Mat>> {
    match (x0, p) {
        (Some(xs), _) => xs.iter().map(to_mat).collect(),
        (None, Some(p)) => optimize::initial_point(problem.inner.problem(), p, seed).map_err(err),
        (None, None) => Err(PyValueError::new_err("give either x0 or p")),
    }
}

fn trace_or_err(py: Python<'_>, r: gstiefel_landing::Result<IterateTrace>) -> PyResult<Py<Trace>> {
    Py::new(
        py,
        Trace {
            inner: r.map_err(err)?,
        },
    )
}

/// Landing run. With `batch` set the stochastic field is used with minibatches
/// of that size, otherwise the full deterministic field.
#[pyfunction]
#[pyo3(signature = (problem, config, p=None, x0=None, max_iters=1000, max_seconds=None, batch=None, seed=0, record_every=1, eval_every=None, record_merit=false))]
#[allow(clippy::too_many_arguments)]
fn run_landing(
    py: Python<'_>,
    problem: &ProblemHandle,
    config: &LandingConfig,
    p: Option<usize>,
    x0: Option<Vec<Rows>>,
    max_iters: usize,
    max_seconds: Option<f64>,
    batch: Option<usize>,
    seed: u64,
    record_every: usize,
    eval_every: Option<usize>,
    record_merit: bool,
) -> PyResult<Py<Trace>> {
    let xs = start(problem, x0, p, seed)?;
    let mut rc = run_config(config, max_iters, max_seconds, record_every)?;
    rc.eval_every = eval_every;
    rc.record_merit = record_merit;
    rc.seed = seed;
    let prob = problem.inner.problem();
    let r = match batch {
        None => py.detach(|| run_landing_deterministic(prob, &xs, &rc)),
        Some(b) => {
            let mut s = problem
                .inner
                .sampler(b, seed.wrapping_add(1))
                .map_err(err)?;
            run_landing_stochastic(prob, s.as_mut(), &xs, &rc)
        }
    };
    trace_or_err(py, r)
}

/// Retraction-based Riemannian gradient descent. With `batch` set, `B` is the
/// running mean of minibatch covariances.
#[pyfunction]
#[pyo3(signature = (problem, eta, p=None, x0=None, max_iters=1000, retraction="polar", batch=None, seed=0, record_every=1, eval_every=None))]
#[allow(clippy::too_many_arguments)]
fn run_baseline(
    py: Python<'_>,
    problem: &ProblemHandle,
    eta: f64,
    p: Option<usize>,
    x0: Option<Vec<Rows>>,
    max_iters: usize,
    retraction: &str,
    batch: Option<usize>,
    seed: u64,
    record_every: usize,
    eval_every: Option<usize>,
) -> PyResult<Py<Trace>> {
    let xs = start(problem, x0, p, seed)?;
    let kind: RetractionKind = parse(retraction)?;
    let schedule = if batch.is_some() {
        "inverse_sqrt"
    } else {
        "constant"
    };
    let cfg = LandingConfig::new(eta, 1.0, 0.5, "psi_b", schedule)?;
    let mut rc = run_config(&cfg, max_iters, None, record_every)?;
    rc.eval_every = eval_every;
    let prob = problem.inner.problem();
    let r = match batch {
        None => run_riemannian_baseline(prob, BSource::Fixed, &xs, &rc, kind),
        Some(b) => {
            let mut s = problem
                .inner
                .sampler(b, seed.wrapping_add(1))
                .map_err(err)?;
            run_riemannian_baseline(prob, BSource::RollingAverage(s.as_mut()), &xs, &rc, kind)
        }
    };
    trace_or_err(py, r)
}

fn spd(b: &Rows) -> PyResult<SpdMatrix> {
    SpdMatrix::new(to_mat(b)?).map_err(err)
}

/// `Ψ + ω∇N` at `x` for Euclidean gradient `g`.
#[pyfunction]
fn landing_field(x: Rows, g: Rows, b: Rows, config: &LandingConfig) -> PyResult<Rows> {
    let f = landing::landing_field_deterministic(
        &to_mat(&x)?,
        &to_mat(&g)?,
        &spd(&b)?,
        &config.to_core()?,
    )
    .map_err(err)?;
    Ok(to_rows(&f))
}

/// Stochastic field from one gradient sample and two constraint samples.
#[pyfunction]
fn landing_field_stochastic(
    x: Rows,
    g: Rows,
    b_zeta: Rows,
    b_zeta_prime: Rows,
    omega: f64,
) -> PyResult<Rows> {
    let f = landing::landing_field_stochastic(
        &to_mat(&x)?,
        &to_mat(&g)?,
        &to_mat(&b_zeta)?,
        &to_mat(&b_zeta_prime)?,
        omega,
    )
    .map_err(err)?;
    Ok(to_rows(&f))
}

/// `‖XᵀBX − I‖_F`.
#[pyfunction]
fn constraint_residual(x: Rows, b: Rows) -> PyResult<f64> {
    Ok(manifold::constraint_residual(&to_mat(&x)?, &to_mat(&b)?)
        .map_err(err)?
        .frobenius_norm)
}

#[pyfunction]
#[pyo3(signature = (x, z, b, kind="polar"))]
fn retract(x: Rows, z: Rows, b: Rows, kind: &str) -> PyResult<Rows> {
    let y =
        manifold::retract(&to_mat(&x)?, &to_mat(&z)?, &to_mat(&b)?, parse(kind)?).map_err(err)?;
    Ok(to_rows(&y))
}

#[pyfunction]
fn riemannian_gradient(x: Rows, g: Rows, b: Rows) -> PyResult<Rows> {
    Ok(to_rows(
        &manifold::riemannian_gradient(&to_mat(&x)?, &to_mat(&g)?, &to_mat(&b)?).map_err(err)?,
    ))
}

/// Largest safe step for the deterministic field at `x`.
#[pyfunction]
fn step_size_safeguard(x: Rows, g: Rows, b: Rows, config: &LandingConfig) -> PyResult<f64> {
    let cfg = config.to_core()?;
    let b = spd(&b)?;
    let c =
        landing::landing_components(&to_mat(&x)?, &to_mat(&g)?, &b, cfg.variant).map_err(err)?;
    let l_n = b.smoothness_constants(cfg.epsilon).map_err(err)?.l_n;
    landing::step_size_safeguard(
        c.grad_n_norm,
        c.field_norm(cfg.omega),
        c.residual.frobenius_norm,
        l_n,
        cfg.omega,
        cfg.epsilon,
    )
    .map_err(err)
}

/// `{c_h, c_h_lower, l_n}` of `B` on the safe region of radius `epsilon`.
#[pyfunction]
fn smoothness_constants(b: Rows, epsilon: f64) -> PyResult<(f64, f64, f64)> {
    let c = spd(&b)?.smoothness_constants(epsilon).map_err(err)?;
    Ok((c.c_h, c.c_h_lower, c.l_n))
}

#[pyfunction]
fn amari_distance(p: Rows) -> PyResult<f64> {
    problems::amari_distance(&to_mat(&p)?).map_err(err)
}

#[pymodule]
fn pygstiefel(m: &Bound<'_, PyModule>) -> PyResult<()> {
    register(m)
}

/// Adds every class and function to `m`.
pub fn register(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add("LandingError", m.py().get_type::<LandingError>())?;
    m.add_class::<ProblemHandle>()?;
    m.add_class::<LandingConfig>()?;
    m.add_class::<Trace>()?;
    m.add_function(wrap_pyfunction!(run_landing, m)?)?;
    m.add_function(wrap_pyfunction!(run_baseline, m)?)?;
    m.add_function(wrap_pyfunction!(landing_field, m)?)?;
    m.add_function(wrap_pyfunction!(landing_field_stochastic, m)?)?;
    m.add_function(wrap_pyfunction!(constraint_residual, m)?)?;
    m.add_function(wrap_pyfunction!(retract, m)?)?;
    m.add_function(wrap_pyfunction!(riemannian_gradient, m)?)?;
    m.add_function(wrap_pyfunction!(step_size_safeguard, m)?)?;
    m.add_function(wrap_pyfunction!(smoothness_constants, m)?)?;
    m.add_function(wrap_pyfunction!(amari_distance, m)?)?;
    Ok(())
}
