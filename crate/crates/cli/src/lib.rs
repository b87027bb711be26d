//! Experiment runner: builds problems from a flat config, runs an optimizer
//! and writes a metrics CSV plus a JSON metadata sidecar.

pub mod config;
pub mod run;
pub mod sweep;

use std::path::PathBuf;

use anyhow::Result;
use clap::{Arg, ArgAction, ArgMatches, Command};

use config::{Experiment, ExperimentConfig, KEYS};

fn with_keys(cmd: Command) -> Command {
    let cmd = cmd.arg(
        Arg::new("config")
            .long("config")
            .short('c')
            .value_name("FILE")
            .help("flat key = value config file; flags override it"),
    );
    KEYS.iter().fold(cmd, |cmd, (key, help)| {
        cmd.arg(
            Arg::new(*key)
                .long(*key)
                .value_name("VALUE")
                .action(ArgAction::Set)
                .help(*help),
        )
    })
}

pub fn command() -> Command {
    Command::new("landing")
        .version(env!("CARGO_PKG_VERSION"))
        .about("Landing methods on the generalized Stiefel manifold")
        .subcommand_required(true)
        .arg_required_else_help(true)
        .subcommand(with_keys(
            Command::new("gevp").about("generalized eigenvalue problem"),
        ))
        .subcommand(with_keys(
            Command::new("cca").about("canonical correlation analysis"),
        ))
        .subcommand(with_keys(
            Command::new("ica").about("independent component analysis"),
        ))
        .subcommand(with_keys(
            Command::new("sweep").about("grid of step and omega multipliers"),
        ))
        .subcommand(with_keys(
            Command::new("show-config").about("print the resolved config as key = value lines"),
        ))
}

/// Defaults, then the config file, then flags. The experiment subcommands pin
/// `experiment`.
pub fn config_from(name: &str, m: &ArgMatches) -> Result<ExperimentConfig> {
    let pinned: Option<Experiment> = match name {
        "gevp" | "cca" | "ica" => Some(name.parse()?),
        _ => None,
    };
    let mut cfg = ExperimentConfig::new(pinned.unwrap_or(Experiment::Gevp));
    if let Some(path) = m.get_one::<String>("config") {
        cfg.apply_file(&PathBuf::from(path))?;
    }
    for (key, _) in KEYS {
        if let Some(v) = m.get_one::<String>(key) {
            cfg.set(key, v)?;
        }
    }
    if let Some(e) = pinned {
        cfg.experiment = e;
    }
    Ok(cfg)
}

pub fn main_with(args: impl IntoIterator<Item = String>) -> Result<()> {
    let matches = command()
        .try_get_matches_from(args)
        .unwrap_or_else(|e| e.exit());
    let (name, sub) = matches.subcommand().expect("subcommand required");
    let cfg = config_from(name, sub)?;
    match name {
        "sweep" => {
            let results = sweep::run_sweep(&cfg)?;
            let failed = results.iter().filter(|(_, r)| r.is_err()).count();
            eprintln!(
                "{} points, {failed} failed, summary in {}",
                results.len(),
                cfg.out_dir.join("summary.csv").display()
            );
        }
        "show-config" => print!("{}", cfg.resolve()?.to_flat()),
        _ => {
            let s = run::run_experiment(&cfg)?;
            eprintln!(
                "{:?} after {} iterations: f = {}, h = {:e}",
                s.status, s.iterations, s.final_f, s.final_h
            );
        }
    }
    Ok(())
}
