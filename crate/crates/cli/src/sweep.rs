use std::fs;

use anyhow::{bail, Context, Result};
use rayon::prelude::*;

use crate::config::ExperimentConfig;
use crate::run::{run_and_write, stream_seed, Instance, RunSummary};

pub const SUMMARY_COLUMNS: [&str; 12] = [
    "point",
    "eta_mult",
    "omega_mult",
    "eta",
    "omega",
    "status",
    "iterations",
    "final_f",
    "final_h",
    "best_f",
    "csv",
    "error",
];

#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub index: usize,
    pub eta_mult: f64,
    pub omega_mult: f64,
    pub config: ExperimentConfig,
}

/// The `(η, ω)` multiplier grid around a resolved base config.
pub fn grid(base: &ExperimentConfig) -> Result<Vec<SweepPoint>> {
    if base.grid_eta.is_empty() || base.grid_omega.is_empty() {
        bail!("sweep grid is empty");
    }
    let eta = base.eta.expect("resolved");
    let omega = base.omega.expect("resolved");
    let mut points = Vec::new();
    for &em in &base.grid_eta {
        for &wm in &base.grid_omega {
            let index = points.len();
            let mut config = base.clone();
            config.eta = Some(eta * em);
            config.omega = Some(omega * wm);
            config.out = base.out_dir.join(format!("point_{index:03}.csv"));
            config.meta = Some(base.out_dir.join(format!("point_{index:03}.json")));
            points.push(SweepPoint {
                index,
                eta_mult: em,
                omega_mult: wm,
                config,
            });
        }
    }
    Ok(points)
}

/// Runs every grid point in parallel and writes `summary.csv`. Failed points
/// are recorded in the summary rather than aborting the sweep.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<Vec<(SweepPoint, Result<RunSummary>)>> {
    let base = cfg.resolve()?;
    let points = grid(&base)?;
    fs::create_dir_all(&base.out_dir)
        .with_context(|| format!("creating {}", base.out_dir.display()))?;
    let instance = Instance::build(&base)?;
    let results: Vec<_> = points
        .into_par_iter()
        .map(|pt| {
            let r = run_and_write(
                &instance,
                &pt.config,
                stream_seed(base.seed, pt.index as u64),
            );
            (pt, r)
        })
        .collect();
    let path = base.out_dir.join("summary.csv");
    let mut w =
        csv::Writer::from_path(&path).with_context(|| format!("creating {}", path.display()))?;
    w.write_record(SUMMARY_COLUMNS)?;
    for (pt, r) in &results {
        let c = &pt.config;
        let mut row = vec![
            pt.index.to_string(),
            pt.eta_mult.to_string(),
            pt.omega_mult.to_string(),
            c.eta.expect("resolved").to_string(),
            c.omega.expect("resolved").to_string(),
        ];
        match r {
            Ok(s) => row.extend([
                serde_json::to_value(s.status)?
                    .as_str()
                    .unwrap_or_default()
                    .to_string(),
                s.iterations.to_string(),
                s.final_f.to_string(),
                s.final_h.to_string(),
                s.best_f.to_string(),
                c.out.display().to_string(),
                String::new(),
            ]),
            Err(e) => row.extend([
                "failed".to_string(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                c.out.display().to_string(),
                format!("{e:#}"),
            ]),
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(results)
}
