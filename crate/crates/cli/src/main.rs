use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use stein_sense_cli::config::{
    resolve, BaselineArg, ConfigFile, Experiment, Overrides, SpreadArg, StrategyArg,
};

/// Risk-advantage experiments for shrinkage estimators in Gaussian sensing.
#[derive(Parser, Debug)]
#[command(name = "stein-sense", version)]
struct Cli {
    /// Experiment to run; may instead come from --config.
    experiment: Option<Experiment>,

    /// JSON config file or a previous run's manifest.json.
    #[arg(long)]
    config: Option<PathBuf>,

    /// True parameter (prior mean for `bayes`), comma separated.
    #[arg(long, allow_hyphen_values = true, value_delimiter = ',')]
    theta: Option<Vec<f64>>,

    /// Probe covariance: `c*I(n)`, `c*I`, `diag(a,b,…)` or rows `a,b;c,d`.
    #[arg(long)]
    sigma: Option<String>,

    /// Noise-channel covariance, same syntax as --sigma.
    #[arg(long)]
    delta: Option<String>,

    /// Prior covariance for `bayes`.
    #[arg(long)]
    xi: Option<String>,

    /// Probe width for the postselection experiments.
    #[arg(long = "B")]
    b: Option<f64>,

    /// Strategy for `risk` and `bayes`.
    #[arg(long, value_enum)]
    strategy: Option<StrategyArg>,

    #[arg(long)]
    n_min: Option<u64>,
    #[arg(long)]
    n_max: Option<u64>,
    /// Number of log-spaced grid points.
    #[arg(long, conflicts_with = "n_step")]
    n_points: Option<u64>,
    /// Step of a linear grid.
    #[arg(long)]
    n_step: Option<u64>,

    /// Monte-Carlo samples per risk value.
    #[arg(long)]
    reps: Option<u64>,

    /// Strategy runs per postselected risk curve.
    #[arg(long)]
    runs: Option<u64>,

    /// Reference for PAD in fig2a/fig2b.
    #[arg(long, value_enum)]
    baseline: Option<BaselineArg>,

    /// Spread estimate driving the filter updates.
    #[arg(long, value_enum)]
    spread: Option<SpreadArg>,

    #[arg(long)]
    seed: Option<u64>,

    #[arg(long = "out")]
    out_dir: Option<PathBuf>,

    /// Worker threads; results do not depend on it.
    #[arg(long, env = "STEIN_SENSE_THREADS")]
    threads: Option<usize>,
}

impl Cli {
    fn overrides(&self) -> Overrides {
        Overrides {
            theta: self.theta.clone(),
            sigma: self.sigma.clone(),
            delta: self.delta.clone(),
            xi: self.xi.clone(),
            b: self.b,
            strategy: self.strategy,
            n_min: self.n_min,
            n_max: self.n_max,
            n_points: self.n_points,
            n_step: self.n_step,
            reps: self.reps,
            runs: self.runs,
            baseline: self.baseline,
            spread: self.spread,
            seed: self.seed,
            out_dir: self.out_dir.clone(),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: &Cli) -> anyhow::Result<ExitCode> {
    if let Some(t) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(t).build_global()?;
    }
    let file = cli.config.as_deref().map(ConfigFile::load).transpose()?;
    let config = resolve(cli.experiment, file, &cli.overrides())?;
    let outcome = stein_sense_cli::run(&config)?;
    for p in &outcome.outputs {
        println!("wrote {}", p.display());
    }
    println!("wrote {}", outcome.manifest.display());
    if outcome.failed_checks > 0 {
        eprintln!("{} self-check famil{} failed", outcome.failed_checks, if outcome.failed_checks == 1 { "y" } else { "ies" });
        return Ok(ExitCode::FAILURE);
    }
    Ok(ExitCode::SUCCESS)
}
