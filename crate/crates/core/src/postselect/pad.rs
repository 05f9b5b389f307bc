use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{run_iterative_strategy, PostEstimator, ProbeModel, StrategyConfig};
use crate::error::{Error, Result};
use crate::gauss::{Moments, SeededRng, SpdMatrix, CHUNK_REPS};
use crate::risk::{advantage, risk_mjs_semianalytic, risk_mle_exact, Advantage, RiskEstimate, RiskMethod};
use crate::scalar::Real;

const MIN_RUNS: u64 = 100;
// strategy runs are far heavier than single draws
const RUNS_PER_CHUNK: u64 = CHUNK_REPS / 64;

/// Mean strategy risk `E[R_k]` for every `k = 1..=n_max`.
///
/// Run `r` consumes `rng.fork(r)`; runs are summed in fixed chunks so the
/// result does not depend on the thread count.
pub fn strategy_risk_curve<T: Real>(
    probe: &ProbeModel<T>,
    n_max: usize,
    config: &StrategyConfig<T>,
    runs: u64,
    rng: &SeededRng,
) -> Result<Vec<RiskEstimate<T>>> {
    if runs < 2 {
        return Err(Error::invalid("runs", "need at least 2 strategy runs"));
    }
    let chunks = runs.div_ceil(RUNS_PER_CHUNK);
    let partials: Vec<Result<Vec<Moments<T>>>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut acc = vec![Moments::empty(); n_max];
            for r in c * RUNS_PER_CHUNK..((c + 1) * RUNS_PER_CHUNK).min(runs) {
                let trace = run_iterative_strategy(probe, n_max, config, &mut rng.fork(r))?;
                for (m, risk) in acc.iter_mut().zip(trace.risks()) {
                    m.push(risk);
                }
            }
            Ok(acc)
        })
        .collect();
    let mut total = vec![Moments::empty(); n_max];
    for part in partials {
        for (t, p) in total.iter_mut().zip(part?) {
            *t = t.merge(&p);
        }
    }
    Ok(total
        .iter()
        .map(|m| RiskEstimate { value: m.mean(), std_error: m.std_error(), reps: runs, method: RiskMethod::MonteCarlo })
        .collect())
}

/// MLE and mean-JS risks without postselection after `N` measurements.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnfilteredRisks<T> {
    pub mle: RiskEstimate<T>,
    pub mjs: RiskEstimate<T>,
}

/// Risk-engine values at `Γ = (B/4N)·I`: exact for the MLE, semi-analytic
/// for mean-JS applied to the averaged measurement.
pub fn unfiltered_risks<T: Real>(probe: &ProbeModel<T>, n: usize, reps: u64, rng: &SeededRng) -> Result<UnfilteredRisks<T>> {
    if n == 0 {
        return Err(Error::invalid("N", "must be at least 1"));
    }
    let gamma = SpdMatrix::scaled_identity(probe.dim(), probe.position_variance() / T::of_usize(n));
    Ok(UnfilteredRisks { mle: risk_mle_exact(&gamma), mjs: risk_mjs_semianalytic(&probe.theta, &gamma, reps, rng)? })
}

/// Reference against which the postselected advantage is compared.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum Baseline {
    /// Risk engine on the unfiltered model, see [`unfiltered_risks`].
    #[default]
    RiskEngine,
    /// The strategy itself with the filter held open. Its mean-JS variant
    /// averages per-measurement shrinkage estimates, which is not the same
    /// estimator as shrinking the averaged measurement.
    ForcedStrategy,
}

/// Postselected and plain risks at one `N`, with the derived advantages.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PadPoint<T> {
    pub n: usize,
    pub risk_pmle: RiskEstimate<T>,
    pub risk_pmjs: RiskEstimate<T>,
    pub risk_mle: RiskEstimate<T>,
    pub risk_mjs: RiskEstimate<T>,
    /// `R(pMLE)/R(pmJS)`.
    pub ad_pmjs_pmle: Advantage<T>,
    /// `R(MLE)/R(mJS)`.
    pub ad_mjs_mle: Advantage<T>,
    pub pad: Advantage<T>,
}

/// PAD over a grid of measurement counts.
///
/// `config.estimator` is ignored: both strategy variants are run with the
/// remaining settings. Postselected risks use `runs` strategy runs; the
/// risk-engine baseline uses `reps` samples for the mean-JS expectation.
pub fn pad_curve<T: Real>(
    probe: &ProbeModel<T>,
    n_values: &[usize],
    config: &StrategyConfig<T>,
    runs: u64,
    reps: u64,
    baseline: Baseline,
    rng: &SeededRng,
) -> Result<Vec<PadPoint<T>>> {
    if runs < MIN_RUNS {
        return Err(Error::invalid("runs", format!("need at least {MIN_RUNS}, got {runs}")));
    }
    if n_values.is_empty() || n_values.contains(&0) {
        return Err(Error::invalid("N", "grid must be nonempty and positive"));
    }
    let n_max = *n_values.iter().max().unwrap_or(&1);
    let with = |estimator, adapt| StrategyConfig { estimator, adapt, ..*config };

    let pmle = strategy_risk_curve(probe, n_max, &with(PostEstimator::Mle, config.adapt), runs, &rng.fork(0))?;
    let pmjs = strategy_risk_curve(probe, n_max, &with(PostEstimator::MeanJs, config.adapt), runs, &rng.fork(1))?;
    let forced = match baseline {
        Baseline::ForcedStrategy => Some((
            strategy_risk_curve(probe, n_max, &with(PostEstimator::Mle, false), runs, &rng.fork(2))?,
            strategy_risk_curve(probe, n_max, &with(PostEstimator::MeanJs, false), runs, &rng.fork(3))?,
        )),
        Baseline::RiskEngine => None,
    };

    let engine_rng = rng.fork(4);
    n_values
        .iter()
        .enumerate()
        .map(|(i, &n)| {
            let (risk_mle, risk_mjs) = match &forced {
                Some((mle, mjs)) => (mle[n - 1], mjs[n - 1]),
                None => {
                    let u = unfiltered_risks(probe, n, reps, &engine_rng.fork(i as u64))?;
                    (u.mle, u.mjs)
                }
            };
            let (risk_pmle, risk_pmjs) = (pmle[n - 1], pmjs[n - 1]);
            let ad_pmjs_pmle = advantage(&risk_pmjs, &risk_pmle)?;
            let ad_mjs_mle = advantage(&risk_mjs, &risk_mle)?;
            Ok(PadPoint {
                n,
                risk_pmle,
                risk_pmjs,
                risk_mle,
                risk_mjs,
                ad_pmjs_pmle,
                ad_mjs_mle,
                pad: ad_pmjs_pmle.ratio(&ad_mjs_mle)?,
            })
        })
        .collect()
}

/// PAD at a single `N` with default strategy settings and the risk-engine
/// baseline.
pub fn pad<T: Real>(n: usize, probe: &ProbeModel<T>, reps: u64, rng: &SeededRng) -> Result<Advantage<T>> {
    let cfg = StrategyConfig::new(PostEstimator::Mle);
    let points = pad_curve(probe, &[n], &cfg, reps, reps.max(10_000), Baseline::RiskEngine, rng)?;
    Ok(points[0].pad)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn probe() -> ProbeModel<f64> {
        ProbeModel::new(vec![1.0 / 30.0, -2.0 / 30.0, 3.0 / 30.0, 1.5 / 30.0], 1.0).unwrap()
    }

    #[test]
    fn open_filter_mle_matches_plain_average() {
        let cfg = StrategyConfig::unfiltered(PostEstimator::Mle);
        let curve = strategy_risk_curve(&probe(), 10, &cfg, 2000, &SeededRng::new(1)).unwrap();
        for (k, r) in curve.iter().enumerate() {
            let exact = 1.0 / (k as f64 + 1.0);
            assert!((r.value - exact).abs() < 4.0 * r.std_error, "k={} {} vs {}", k + 1, r.value, exact);
        }
    }

    #[test]
    fn forced_baseline_with_open_filter_gives_unit_pad() {
        let cfg = StrategyConfig::unfiltered(PostEstimator::Mle);
        let pts = pad_curve(&probe(), &[6], &cfg, 200, 1000, Baseline::ForcedStrategy, &SeededRng::new(2)).unwrap();
        let p = pts[0].pad;
        assert!((p.value - 1.0).abs() < 4.0 * p.std_error, "{p:?}");
    }

    #[test]
    fn curve_is_reproducible() {
        let cfg = StrategyConfig::new(PostEstimator::MeanJs);
        let a = strategy_risk_curve(&probe(), 15, &cfg, 150, &SeededRng::new(5)).unwrap();
        let b = strategy_risk_curve(&probe(), 15, &cfg, 150, &SeededRng::new(5)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_small_run_counts() {
        let cfg = StrategyConfig::new(PostEstimator::Mle);
        assert!(pad_curve(&probe(), &[5], &cfg, 50, 1000, Baseline::RiskEngine, &SeededRng::new(0)).is_err());
        assert!(pad_curve(&probe(), &[], &cfg, 200, 1000, Baseline::RiskEngine, &SeededRng::new(0)).is_err());
    }
}
