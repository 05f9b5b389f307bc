use serde::{Deserialize, Serialize};

use super::{PostselectedSampler, ProbeModel};
use crate::error::{Error, Result};
use crate::estimators::estimate_mjs;
use crate::gauss::{SeededRng, SpdMatrix};
use crate::scalar::{dist_sq, Real};

/// Estimator applied to each rescaled measurement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PostEstimator {
    Mle,
    MeanJs,
}

impl PostEstimator {
    pub fn label(self) -> &'static str {
        match self {
            PostEstimator::Mle => "mle",
            PostEstimator::MeanJs => "mjs",
        }
    }
}

/// How the spread `σ̂_k` of the per-measurement estimates is measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SpreadMeasure {
    /// `σ̂² = Σ‖θ̂ᵢ − θ̄‖² / (k−1)`: the vector sample standard deviation, so
    /// `δ̂ = σ̂/√k` tracks `‖θ̄_k − θ‖`.
    Total,
    /// `σ̂² = Σ‖θ̂ᵢ − θ̄‖² / (n(k−1))`: pooled per-component deviation.
    PooledPerComponent,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StrategyConfig<T> {
    pub estimator: PostEstimator,
    /// When false the filter stays open (`t ≡ 1`, `θ₀ ≡ 0`).
    pub adapt: bool,
    pub spread: SpreadMeasure,
    /// Tighten when `δ̂_k < threshold·t`.
    pub threshold: T,
    /// New transmission is `reset_factor·δ̂_k`.
    pub reset_factor: T,
    pub t_min: T,
    pub max_attempts: u64,
}

impl<T: Real> StrategyConfig<T> {
    pub fn new(estimator: PostEstimator) -> Self {
        Self {
            estimator,
            adapt: true,
            spread: SpreadMeasure::Total,
            threshold: T::lit(0.3),
            reset_factor: T::lit(3.0),
            t_min: T::lit(1e-4),
            max_attempts: 1_000_000,
        }
    }

    /// Same estimator with the filter held open.
    pub fn unfiltered(estimator: PostEstimator) -> Self {
        Self { adapt: false, ..Self::new(estimator) }
    }

    fn validate(&self) -> Result<()> {
        if !(self.t_min > T::zero() && self.t_min < T::one()) {
            return Err(Error::invalid("t_min", "must lie in (0, 1)"));
        }
        if !(self.threshold > T::zero()) || !(self.reset_factor > T::zero()) {
            return Err(Error::invalid("threshold", "threshold and reset factor must be positive"));
        }
        if self.max_attempts == 0 {
            return Err(Error::invalid("max_attempts", "must be at least 1"));
        }
        Ok(())
    }
}

/// Filter setting and running statistics of the per-measurement estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterState<T> {
    pub theta0: Vec<T>,
    pub t: T,
    pub epoch_estimates: Vec<Vec<T>>,
    pub k: usize,
    mean: Vec<T>,
    // Welford sum of squared deviations, summed over components
    m2: T,
}

impl<T: Real> FilterState<T> {
    /// Open filter with guess at the origin.
    pub fn initial(dim: usize) -> Self {
        Self {
            theta0: vec![T::zero(); dim],
            t: T::one(),
            epoch_estimates: Vec::new(),
            k: 0,
            mean: vec![T::zero(); dim],
            m2: T::zero(),
        }
    }

    /// Collated estimate `θ̄_k`.
    pub fn theta_bar(&self) -> &[T] {
        &self.mean
    }

    pub fn push_estimate(&mut self, est: Vec<T>) {
        self.k += 1;
        let kf = T::of_usize(self.k);
        let mut m2 = T::zero();
        for (m, &e) in self.mean.iter_mut().zip(&est) {
            let before = e - *m;
            *m += before / kf;
            m2 += before * (e - *m);
        }
        self.m2 += m2;
        self.epoch_estimates.push(est);
    }

    /// `σ̂_k`; `None` before two estimates exist.
    pub fn spread(&self, measure: SpreadMeasure) -> Option<T> {
        if self.k < 2 {
            return None;
        }
        let dof = T::of_usize(self.k - 1);
        let var = match measure {
            SpreadMeasure::Total => self.m2 / dof,
            SpreadMeasure::PooledPerComponent => self.m2 / (dof * T::of_usize(self.mean.len())),
        };
        Some(var.max(T::zero()).sqrt())
    }

    /// `δ̂_k = σ̂_k/√k`.
    pub fn delta_hat(&self, measure: SpreadMeasure) -> Option<T> {
        self.spread(measure).map(|s| s / T::of_usize(self.k).sqrt())
    }
}

/// Per-measurement record of a strategy run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StrategyRecord<T> {
    pub k: usize,
    /// Transmission used for measurement `k`.
    pub t: T,
    pub delta_hat: Option<T>,
    /// `R_k = ‖θ̄_k − θ‖²`.
    pub risk: T,
    /// Filter proposals consumed by measurement `k`.
    pub attempts: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyTrace<T> {
    pub records: Vec<StrategyRecord<T>>,
    pub theta_bars: Vec<Vec<T>>,
}

impl<T: Real> StrategyTrace<T> {
    pub fn final_estimate(&self) -> Option<&[T]> {
        self.theta_bars.last().map(|v| v.as_slice())
    }

    pub fn risks(&self) -> impl Iterator<Item = T> + '_ {
        self.records.iter().map(|r| r.risk)
    }
}

/// Adaptive postselection strategy.
///
/// Starts with `θ₀ = 0`, `t = 1`. Measurement `k` draws `X_k` from the exact
/// postselected law, rescales to `Y_k = θ₀ + t(X_k − θ₀) ~ N(θ, t²(B/4)I)`,
/// estimates `θ̂_k` from `Y_k` alone and averages into `θ̄_k`. From `k = 2`
/// on, when `δ̂_k < 0.3t` the filter is re-centred at `θ̄_k` and tightened to
/// `t = max(3δ̂_k, t_min)`.
pub fn run_iterative_strategy<T: Real>(
    probe: &ProbeModel<T>,
    measurements: usize,
    config: &StrategyConfig<T>,
    rng: &mut SeededRng,
) -> Result<StrategyTrace<T>> {
    config.validate()?;
    if measurements == 0 {
        return Err(Error::invalid("N", "must be at least 1"));
    }
    let n = probe.dim();
    if config.estimator == PostEstimator::MeanJs && n < 4 {
        return Err(Error::DimensionTooSmall { required: 4, found: n });
    }

    let mut state = FilterState::initial(n);
    let mut records = Vec::with_capacity(measurements);
    let mut theta_bars = Vec::with_capacity(measurements);
    let mut sampler = PostselectedSampler::new(&probe.theta, &state.theta0, state.t, probe.b)?;

    for _ in 0..measurements {
        let t_used = state.t;
        let draw = sampler.sample(rng, config.max_attempts)?;
        let y: Vec<T> = draw.x.iter().zip(&state.theta0).map(|(&x, &c)| c + t_used * (x - c)).collect();
        let est = match config.estimator {
            PostEstimator::Mle => y,
            PostEstimator::MeanJs => {
                let cov = SpdMatrix::scaled_identity(n, t_used * t_used * probe.position_variance());
                estimate_mjs(&y, &cov)?
            }
        };
        state.push_estimate(est);

        let delta_hat = state.delta_hat(config.spread);
        if let (true, Some(dh)) = (config.adapt, delta_hat) {
            if dh < config.threshold * state.t {
                state.t = (config.reset_factor * dh).max(config.t_min).min(state.t);
                state.theta0 = state.theta_bar().to_vec();
                sampler = PostselectedSampler::new(&probe.theta, &state.theta0, state.t, probe.b)?;
            }
        }

        records.push(StrategyRecord {
            k: state.k,
            t: t_used,
            delta_hat,
            risk: dist_sq(state.theta_bar(), &probe.theta),
            attempts: draw.attempts,
        });
        theta_bars.push(state.theta_bar().to_vec());
    }
    Ok(StrategyTrace { records, theta_bars })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn probe() -> ProbeModel<f64> {
        ProbeModel::new(vec![1.0 / 30.0, -2.0 / 30.0, 3.0 / 30.0, 1.5 / 30.0], 1.0).unwrap()
    }

    #[test]
    fn welford_matches_two_pass() {
        let mut s = FilterState::<f64>::initial(3);
        let ests = [vec![1.0, 2.0, 3.0], vec![0.5, -1.0, 2.0], vec![2.0, 0.0, 1.0], vec![-1.0, 1.0, 0.0]];
        for e in &ests {
            s.push_estimate(e.clone());
        }
        let k = ests.len() as f64;
        let mean: Vec<f64> = (0..3).map(|j| ests.iter().map(|e| e[j]).sum::<f64>() / k).collect();
        let ss: f64 = ests.iter().map(|e| dist_sq(e, &mean)).sum();
        assert!((s.spread(SpreadMeasure::Total).unwrap() - (ss / (k - 1.0)).sqrt()).abs() < 1e-12);
        let pooled = (ss / (3.0 * (k - 1.0))).sqrt();
        assert!((s.spread(SpreadMeasure::PooledPerComponent).unwrap() - pooled).abs() < 1e-12);
        assert!((s.delta_hat(SpreadMeasure::Total).unwrap() - (ss / (k - 1.0)).sqrt() / 2.0).abs() < 1e-12);
        for (a, b) in s.theta_bar().iter().zip(&mean) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn spread_undefined_for_single_estimate() {
        let mut s = FilterState::<f64>::initial(4);
        s.push_estimate(vec![1.0; 4]);
        assert_eq!(s.spread(SpreadMeasure::Total), None);
    }

    #[test]
    fn transmission_never_increases() {
        for est in [PostEstimator::Mle, PostEstimator::MeanJs] {
            let cfg = StrategyConfig::new(est);
            for run in 0..20 {
                let mut rng = SeededRng::new(3).fork(run);
                let trace = run_iterative_strategy(&probe(), 80, &cfg, &mut rng).unwrap();
                assert_eq!(trace.records.len(), 80);
                assert_eq!(trace.records[0].t, 1.0);
                assert!(trace.records[0].delta_hat.is_none());
                for w in trace.records.windows(2) {
                    assert!(w[1].t <= w[0].t);
                    assert!(w[1].t >= cfg.t_min);
                }
                assert!(trace.risks().all(|r| r >= 0.0));
            }
        }
    }

    #[test]
    fn open_filter_never_rejects() {
        let cfg = StrategyConfig::unfiltered(PostEstimator::Mle);
        let mut rng = SeededRng::new(9);
        let trace = run_iterative_strategy(&probe(), 30, &cfg, &mut rng).unwrap();
        assert!(trace.records.iter().all(|r| r.t == 1.0 && r.attempts == 1));
    }

    #[test]
    fn run_is_reproducible() {
        let cfg = StrategyConfig::new(PostEstimator::MeanJs);
        let a = run_iterative_strategy(&probe(), 40, &cfg, &mut SeededRng::new(4)).unwrap();
        let b = run_iterative_strategy(&probe(), 40, &cfg, &mut SeededRng::new(4)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn invalid_runs() {
        let mut rng = SeededRng::new(0);
        let cfg = StrategyConfig::new(PostEstimator::Mle);
        assert!(run_iterative_strategy(&probe(), 0, &cfg, &mut rng).is_err());
        let bad = StrategyConfig { t_min: 0.0, ..cfg };
        assert!(run_iterative_strategy(&probe(), 5, &bad, &mut rng).is_err());
    }
}
