use gstiefel_landing::data::{gen_spd_pair, SpectrumKind, SpectrumSpec};
use gstiefel_landing::landing::{AscentVariant, LandingConfig, StepKind, StepSchedule};
use gstiefel_landing::optimize::{initial_point, run_landing_deterministic, RunConfig};
use gstiefel_landing::problems::GevpProblem;

fn main() -> gstiefel_landing::Result<()> {
    let (n, p) = (50, 5);
    let sa = SpectrumSpec::new(SpectrumKind::Equidistant, 10.0, n)?;
    let sb = SpectrumSpec::new(SpectrumKind::Exponential, 10.0, n)?;
    let (a, b) = gen_spd_pair(&sa, &sb, 0)?;
    let problem = GevpProblem::new(a, b)?;

    let step = StepSchedule::new(StepKind::Constant, 1.0)?;
    let landing = LandingConfig::new(1.0, 0.5, AscentVariant::PsiB, step)?;
    let mut cfg = RunConfig::new(landing, 5000);
    cfg.record_every = 500;
    cfg.field_tol = 1e-10;

    let x0 = initial_point(&problem, p, 0)?;
    let trace = run_landing_deterministic(&problem, &x0, &cfg)?;
    let opt = problem.oracle(p)?.optimum;
    for r in &trace.records {
        println!(
            "{:>5}  f - f* = {:.3e}  ||h|| = {:.3e}",
            r.k,
            r.f_val - opt,
            r.h_norm
        );
    }
    println!("{:?} after {} iterations", trace.status, trace.iterations());
    Ok(())
}
