//! The experiments behind each subcommand. Each N-grid point draws from
//! `rng.fork(N)`, so a value does not depend on which other points are in
//! the grid.

use anyhow::Result;
use stein_sense::estimators::NuJsConfig;
use stein_sense::postselect::{isotropy, pad_curve, PadPoint, PostEstimator, ProbeModel, StrategyConfig};
use stein_sense::risk::{
    advantage, bayes_risk_mc, bayes_risk_table, risk_js_semianalytic, risk_mjs_semianalytic, risk_mle_exact, Advantage,
};
use stein_sense::sensing::effective_covariance;
use stein_sense::{EstimatorKind, GaussianPrior, RiskEstimate, SeededRng, SpdMatrix, Strategy};

use crate::config::ExperimentConfig;
use crate::output::{Cell, Table};

/// `R(MLE)` and `R(JS)` (origin target) for one strategy at `N` resources.
#[derive(Debug, Clone, Copy)]
pub struct JsPair {
    pub mle: RiskEstimate<f64>,
    pub js: RiskEstimate<f64>,
}

impl JsPair {
    /// `R(MLE)/R(JS)`.
    pub fn advantage(&self) -> Result<Advantage<f64>> {
        Ok(advantage(&self.js, &self.mle)?)
    }
}

pub fn js_pair(
    strategy: Strategy,
    theta: &[f64],
    sigma: &SpdMatrix<f64>,
    delta: Option<&SpdMatrix<f64>>,
    n: u64,
    reps: u64,
    rng: &SeededRng,
) -> Result<JsPair> {
    let delta = if strategy.is_noisy() { delta } else { None };
    let gamma = effective_covariance(strategy, sigma, delta, n)?;
    let nu = vec![0.0; theta.len()];
    Ok(JsPair { mle: risk_mle_exact(&gamma), js: risk_js_semianalytic(theta, &gamma, &nu, reps, rng)? })
}

#[derive(Debug, Clone, Copy)]
pub struct Fig1Row {
    pub n: u64,
    pub ad_sep_noisy: Advantage<f64>,
    pub ad_seq_noisy: Advantage<f64>,
    pub ad_seq_noiseless: Advantage<f64>,
    /// `R(JS, separate noisy) / R(JS, sequential noisy)`.
    pub ad_seq_vs_sep: Advantage<f64>,
}

pub fn fig1_row(
    theta: &[f64],
    sigma: &SpdMatrix<f64>,
    delta: &SpdMatrix<f64>,
    n: u64,
    reps: u64,
    rng: &SeededRng,
) -> Result<Fig1Row> {
    let rng = rng.fork(n);
    let sep = js_pair(Strategy::SeparateNoisy, theta, sigma, Some(delta), n, reps, &rng.fork(0))?;
    let seq = js_pair(Strategy::SequentialNoisy, theta, sigma, Some(delta), n, reps, &rng.fork(1))?;
    let ideal = js_pair(Strategy::SequentialNoiseless, theta, sigma, None, n, reps, &rng.fork(2))?;
    Ok(Fig1Row {
        n,
        ad_sep_noisy: sep.advantage()?,
        ad_seq_noisy: seq.advantage()?,
        ad_seq_noiseless: ideal.advantage()?,
        ad_seq_vs_sep: advantage(&seq.js, &sep.js)?,
    })
}

fn ad_cells(a: &Advantage<f64>) -> [Cell; 2] {
    [Cell::Real(a.value), Cell::Real(a.std_error)]
}

fn risk_cells(r: &RiskEstimate<f64>) -> [Cell; 2] {
    [Cell::Real(r.value), Cell::Real(r.std_error)]
}

fn row(n: u64, groups: &[[Cell; 2]]) -> Vec<Cell> {
    std::iter::once(Cell::Int(n)).chain(groups.iter().flat_map(|g| g.iter().cloned())).collect()
}

pub fn fig1(c: &ExperimentConfig) -> Result<Vec<Table>> {
    let sigma = c.sigma_matrix()?;
    let delta = c.delta_matrix()?.expect("validated");
    let rng = SeededRng::new(c.seed);
    let mut t = Table::with_se(
        "fig1",
        "N",
        &["ad_sep_noisy_js", "ad_seq_noisy_js", "ad_seq_noiseless_js", "ad_seq_vs_sep_js"],
    );
    for n in c.n_values() {
        let r = fig1_row(&c.theta, &sigma, &delta, n, c.reps, &rng)?;
        t.push(row(
            n,
            &[ad_cells(&r.ad_sep_noisy), ad_cells(&r.ad_seq_noisy), ad_cells(&r.ad_seq_noiseless), ad_cells(&r.ad_seq_vs_sep)],
        ));
    }
    Ok(vec![t])
}

pub fn risk(c: &ExperimentConfig) -> Result<Vec<Table>> {
    let sigma = c.sigma_matrix()?;
    let delta = c.delta_matrix()?;
    let strategy = Strategy::from(c.strategy);
    let with_mjs = c.theta.len() >= 4;
    let rng = SeededRng::new(c.seed);
    let mut names = vec!["risk_mle", "risk_js", "ad_js_mle"];
    if with_mjs {
        names.extend(["risk_mjs", "ad_mjs_mle"]);
    }
    let mut t = Table::with_se("risk", "N", &names);
    for n in c.n_values() {
        let point_rng = rng.fork(n);
        let pair = js_pair(strategy, &c.theta, &sigma, delta.as_ref(), n, c.reps, &point_rng.fork(0))?;
        let mut groups = vec![risk_cells(&pair.mle), risk_cells(&pair.js), ad_cells(&pair.advantage()?)];
        if with_mjs {
            let gamma = effective_covariance(strategy, &sigma, delta.as_ref(), n)?;
            let mjs = risk_mjs_semianalytic(&c.theta, &gamma, c.reps, &point_rng.fork(1))?;
            groups.extend([risk_cells(&mjs), ad_cells(&advantage(&mjs, &pair.mle)?)]);
        }
        t.push(row(n, &groups));
    }
    Ok(vec![t])
}

/// Estimators compared under the Gaussian prior, with their column stem.
pub fn bayes_estimators(prior: &GaussianPrior<f64>) -> Vec<(&'static str, EstimatorKind<f64>)> {
    let n = prior.dim();
    let mut v = vec![("mle", EstimatorKind::Mle), ("js", EstimatorKind::NuJs(NuJsConfig::origin(n)))];
    if n >= 4 {
        v.push(("mjs", EstimatorKind::MeanJs));
    }
    v.push(("bayes", EstimatorKind::Bayes(prior.clone())));
    v
}

pub fn bayes(c: &ExperimentConfig) -> Result<Vec<Table>> {
    let sigma = c.sigma_matrix()?;
    let delta = c.delta_matrix()?;
    let prior = GaussianPrior::new(c.theta.clone(), c.xi_matrix()?)?;
    let strategy = Strategy::from(c.strategy);
    let kinds = bayes_estimators(&prior);
    let names: Vec<String> = ["table", "mc"]
        .iter()
        .flat_map(|src| kinds.iter().map(move |(k, _)| format!("{src}_{k}")))
        .collect();
    let refs: Vec<&str> = names.iter().map(String::as_str).collect();
    let mut t = Table::with_se("bayes", "N", &refs);
    let rng = SeededRng::new(c.seed);
    for n in c.n_values() {
        let gamma = effective_covariance(strategy, &sigma, delta.as_ref(), n)?;
        let point_rng = rng.fork(n);
        let mut groups = Vec::new();
        for (i, (_, kind)) in kinds.iter().enumerate() {
            groups.push(risk_cells(&bayes_risk_table(kind, &gamma, &prior, c.reps, &point_rng.fork(i as u64))?));
        }
        for (i, (_, kind)) in kinds.iter().enumerate() {
            groups.push(risk_cells(&bayes_risk_mc(kind, &prior, &gamma, c.reps, &point_rng.fork(100 + i as u64))?));
        }
        t.push(row(n, &groups));
    }
    Ok(vec![t])
}

pub fn strategy_config(c: &ExperimentConfig) -> StrategyConfig<f64> {
    StrategyConfig { spread: c.spread.into(), ..StrategyConfig::new(PostEstimator::Mle) }
}

fn n_grid(c: &ExperimentConfig) -> Vec<usize> {
    c.n_values().into_iter().map(|n| n as usize).collect()
}

pub fn fig2a_points(c: &ExperimentConfig, theta: &[f64], rng: &SeededRng) -> Result<Vec<PadPoint<f64>>> {
    let probe = ProbeModel::new(theta.to_vec(), c.b)?;
    Ok(pad_curve(&probe, &n_grid(c), &strategy_config(c), c.runs, c.reps, c.baseline.into(), rng)?)
}

pub fn fig2a(c: &ExperimentConfig) -> Result<Vec<Table>> {
    let points = fig2a_points(c, &c.theta, &SeededRng::new(c.seed))?;
    let mut t = Table::with_se(
        "fig2a",
        "N",
        &["risk_pmle", "risk_pmjs", "risk_mle", "risk_mjs", "ad_pmjs_pmle", "ad_mjs_mle"],
    );
    for p in &points {
        t.push(row(
            p.n as u64,
            &[
                risk_cells(&p.risk_pmle),
                risk_cells(&p.risk_pmjs),
                risk_cells(&p.risk_mle),
                risk_cells(&p.risk_mjs),
                ad_cells(&p.ad_pmjs_pmle),
                ad_cells(&p.ad_mjs_mle),
            ],
        ));
    }
    Ok(vec![t])
}

/// Stretch factors applied to the deviation of `θ` from its component mean;
/// isotropy scales with their squares.
pub const FIG2B_STRETCH: [f64; 4] = [1.0 / 6.0, 0.5, 1.0, 2.0];

pub fn stretched(theta: &[f64], lambda: f64) -> Vec<f64> {
    let m = theta.iter().sum::<f64>() / theta.len() as f64;
    theta.iter().map(|&x| m + lambda * (x - m)).collect()
}

pub fn fig2b(c: &ExperimentConfig) -> Result<Vec<Table>> {
    let rng = SeededRng::new(c.seed);
    let names: Vec<String> = (1..=FIG2B_STRETCH.len()).map(|i| format!("pad_{i}")).collect();
    let refs: Vec<&str> = names.iter().map(String::as_str).collect();
    let mut pads = Table::with_se("fig2b", "N", &refs);

    let mut header = vec!["curve".to_string(), "stretch".into(), "v".into()];
    header.extend((1..=c.theta.len()).map(|j| format!("theta_{j}")));
    let mut thetas = Table::new("fig2b_theta", header);

    let mut curves = Vec::new();
    for (i, &lambda) in FIG2B_STRETCH.iter().enumerate() {
        let theta = stretched(&c.theta, lambda);
        let mut r = vec![Cell::Int(i as u64 + 1), Cell::Real(lambda), Cell::Real(isotropy(&theta))];
        r.extend(theta.iter().map(|&x| Cell::Real(x)));
        thetas.push(r);
        curves.push(fig2a_points(c, &theta, &rng.fork(i as u64))?);
    }
    for (k, n) in c.n_values().into_iter().enumerate() {
        let groups: Vec<[Cell; 2]> = curves.iter().map(|pts| ad_cells(&pts[k].pad)).collect();
        pads.push(row(n, &groups));
    }
    Ok(vec![pads, thetas])
}
