//! Experiment harness: configuration, the experiments behind each
//! subcommand, CSV/manifest output and numerical self-checks.

pub mod config;
pub mod experiments;
pub mod output;
pub mod selfcheck;

use std::path::PathBuf;
use std::time::Instant;

use anyhow::{Context, Result};
use stein_sense::SeededRng;

use config::{Experiment, ExperimentConfig};
use output::{Manifest, Table};

#[derive(Debug)]
pub struct RunOutcome {
    pub outputs: Vec<PathBuf>,
    pub manifest: PathBuf,
    /// Failed self-check families; zero for the other experiments.
    pub failed_checks: usize,
}

/// Computes the experiment's tables without touching the filesystem.
pub fn compute(config: &ExperimentConfig) -> Result<(Vec<Table>, usize)> {
    Ok(match config.experiment {
        Experiment::Fig1 => (experiments::fig1(config)?, 0),
        Experiment::Fig2a => (experiments::fig2a(config)?, 0),
        Experiment::Fig2b => (experiments::fig2b(config)?, 0),
        Experiment::Risk => (experiments::risk(config)?, 0),
        Experiment::Bayes => (experiments::bayes(config)?, 0),
        Experiment::Selfcheck => {
            let checks = selfcheck::run_all(config.reps, &SeededRng::new(config.seed));
            for c in &checks {
                println!("{:<16} {} {}", c.name, if c.passed() { "ok  " } else { "FAIL" }, c.detail);
            }
            let failed = checks.iter().filter(|c| !c.passed()).count();
            (vec![selfcheck::table(&checks)], failed)
        }
    })
}

/// Runs the experiment and writes its CSVs and `manifest.json` into
/// `config.out_dir`.
pub fn run(config: &ExperimentConfig) -> Result<RunOutcome> {
    let started_at = chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true);
    let clock = Instant::now();
    let (tables, failed_checks) = compute(config)?;
    std::fs::create_dir_all(&config.out_dir)
        .with_context(|| format!("creating output directory {}", config.out_dir.display()))?;
    let outputs = tables.iter().map(|t| t.write(&config.out_dir)).collect::<Result<Vec<_>>>()?;
    let manifest = Manifest {
        config,
        seed: config.seed,
        version: output::version_string(),
        started_at,
        duration_s: clock.elapsed().as_secs_f64(),
        outputs: outputs.clone(),
    }
    .write(&config.out_dir)?;
    Ok(RunOutcome { outputs, manifest, failed_checks })
}
