use pyo3::prelude::*;
use pyo3::types::PyDict;

fn module(py: Python<'_>) -> Bound<'_, PyModule> {
    let m = PyModule::new(py, "pygstiefel").unwrap();
    pygstiefel::register(&m).unwrap();
    m
}

fn run(code: &str) {
    Python::attach(|py| {
        let globals = PyDict::new(py);
        globals.set_item("pg", module(py)).unwrap();
        let code = std::ffi::CString::new(code).unwrap();
        if let Err(e) = py.run(&code, Some(&globals), None) {
            e.print(py);
            panic!("python snippet failed");
        }
    });
}

#[test]
fn deterministic_gevp_reaches_the_oracle() {
    run(r#"
prob = pg.Problem.gevp(20, seed=0)
cfg = pg.LandingConfig(eta=1.0, omega=1.0)
t = pg.run_landing(prob, cfg, p=4, max_iters=5000, record_every=100)
last = t.records()[-1]
assert t.status == "Converged", t.status
assert last["h_norm"] <= 1e-8
assert abs(last["f_val"] - prob.oracle(4)) <= 1e-6 * abs(prob.oracle(4))
x = t.final_point[0]
assert len(x) == 20 and len(x[0]) == 4
assert pg.constraint_residual(x, prob.constraint(0)) <= 1e-8
"#);
}

#[test]
fn geometry_helpers() {
    run(r#"
b = [[2.0, 0.0], [0.0, 0.5]]
x = pg.retract([[1.0], [1.0]], [[0.0], [0.0]], b, "cholesky_qr")
assert pg.constraint_residual(x, b) < 1e-14
c_h, c_low, l_n = pg.smoothness_constants(b, 0.5)
assert c_h > c_low > 0 and l_n > 0
assert pg.amari_distance([[0.0, 3.0], [2.0, 0.0]]) == 0.0
cfg = pg.LandingConfig()
f = pg.landing_field(x, [[1.0], [0.0]], b, cfg)
s = pg.landing_field_stochastic(x, [[1.0], [0.0]], b, b, cfg.omega)
assert max(abs(f[i][0] - s[i][0]) for i in range(2)) < 1e-14
assert pg.step_size_safeguard(x, [[1.0], [0.0]], b, cfg) > 0
"#);
}

#[test]
fn errors_become_python_exceptions() {
    run(r#"
try:
    pg.LandingConfig(epsilon=2.0)
    raise SystemExit("accepted epsilon = 2")
except pg.LandingError as e:
    assert "epsilon" in str(e)
try:
    pg.amari_distance([[1.0, 2.0], [3.0]])
    raise SystemExit("accepted ragged rows")
except ValueError:
    pass
"#);
}

#[test]
fn stochastic_problems_run() {
    run(r#"
ica = pg.Problem.ica(4, 2000, seed=1)
t = pg.run_landing(ica, pg.LandingConfig(eta=0.1, schedule="inverse_sqrt"), p=4, max_iters=200, batch=64, eval_every=100)
assert [r["iter"] for r in t.records()] == [0, 100, 200]
assert t.records()[-1]["extra"] >= 0
cca = pg.Problem.cca(8, 500, latent=2)
assert cca.num_blocks == 2
t = pg.run_baseline(cca, 0.05, p=2, max_iters=50, batch=32, eval_every=25)
assert len(t.records()[-1]["h_blocks"]) == 2
"#);
}
