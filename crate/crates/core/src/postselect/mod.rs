//! Postselective filtering of a Gaussian position probe.
//!
//! The probe `|ψ_θ⟩` has position wavefunction `C^{n/2} exp(−‖x−θ‖²/B)` with
//! `C = √(2/(πB))`, so an unfiltered position measurement is distributed as
//! `N(θ, (B/4)·I)`. The filter has Kraus operator `K = 1 − (1−t)|ψ_θ₀⟩⟨ψ_θ₀|`
//! for a guess `θ₀` and amplitude transmission `t`.

mod pad;
mod sampler;
mod strategy;

pub use pad::{pad, pad_curve, strategy_risk_curve, unfiltered_risks, Baseline, PadPoint, UnfilteredRisks};
pub use sampler::{envelope_constant, mixture_weight, postselected_pdf, sample_postselected, Draw, PostselectedSampler};
pub use strategy::{
    run_iterative_strategy, FilterState, PostEstimator, SpreadMeasure, StrategyConfig, StrategyRecord, StrategyTrace,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{dist_sq, Real};

/// Unknown displacement `θ` together with the known probe width `B`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeModel<T> {
    pub theta: Vec<T>,
    pub b: T,
}

impl<T: Real> ProbeModel<T> {
    pub fn new(theta: Vec<T>, b: T) -> Result<Self> {
        if theta.len() < 4 {
            return Err(Error::DimensionTooSmall { required: 4, found: theta.len() });
        }
        if !(b > T::zero()) || !b.is_finite() {
            return Err(Error::invalid("B", "must be positive and finite"));
        }
        Ok(Self { theta, b })
    }

    pub fn dim(&self) -> usize {
        self.theta.len()
    }

    /// `C = √(2/(πB))`.
    pub fn normalization(&self) -> T {
        (T::lit(2.0) / (T::lit(std::f64::consts::PI) * self.b)).sqrt()
    }

    /// Per-component variance `B/4` of an unfiltered position measurement.
    pub fn position_variance(&self) -> T {
        self.b / T::lit(4.0)
    }
}

/// `⟨ψ_θ₀|ψ_θ⟩ = exp(−‖θ−θ₀‖²/(2B))`.
pub fn overlap<T: Real>(theta: &[T], theta0: &[T], b: T) -> T {
    (-dist_sq(theta, theta0) / (T::lit(2.0) * b)).exp()
}

/// Exact pass probability `‖K|ψ_θ⟩‖² = 1 + (t²−1)·exp(−‖δ‖²/B)`.
pub fn pass_probability<T: Real>(delta: &[T], t: T, b: T) -> T {
    let e = (-crate::scalar::norm_sq(delta) / b).exp();
    T::one() + (t * t - T::one()) * e
}

/// Small-displacement approximation `t²` of [`pass_probability`].
pub fn pass_probability_approx<T: Real>(t: T) -> T {
    t * t
}

/// Isotropy `v(θ) = Σ (θᵢ − θ̄)²`.
pub fn isotropy<T: Real>(theta: &[T]) -> T {
    if theta.is_empty() {
        return T::zero();
    }
    let m = theta.iter().copied().sum::<T>() / T::of_usize(theta.len());
    theta.iter().map(|&x| (x - m) * (x - m)).sum()
}

pub(crate) fn check_transmission<T: Real>(t: T) -> Result<()> {
    if t > T::zero() && t <= T::one() {
        Ok(())
    } else {
        Err(Error::invalid("t", format!("transmission must lie in (0, 1], got {t}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overlap_examples() {
        assert_eq!(overlap(&[1.0, 2.0], &[1.0, 2.0], 0.7), 1.0);
        // ‖δ‖² = 2B
        let b = 0.5;
        assert!((overlap(&[1.0, 0.0], &[0.0, 0.0], b) - (-1.0f64).exp()).abs() < 1e-15);
        assert!(overlap(&[1e3, 0.0], &[0.0, 0.0], 1.0) < 1e-300);
    }

    #[test]
    fn pass_probability_examples() {
        assert_eq!(pass_probability(&[0.3, -0.2], 1.0, 1.0), 1.0);
        assert!((pass_probability::<f64>(&[0.0, 0.0], 0.5, 1.0) - 0.25).abs() < 1e-15);
        let expected = 1.0 - 0.75 * (-1.0f64).exp();
        assert!((pass_probability(&[1.0, 0.0], 0.5, 1.0) - expected).abs() < 1e-15);
        assert!((expected - 0.7241).abs() < 1e-4);
    }

    #[test]
    fn pass_probability_tends_to_t_squared() {
        // |P − t²| = (1 − t²)(1 − e^{−‖δ‖²/B}) ≤ ‖δ‖²/B
        let b = 1.0;
        for &t in &[0.3, 0.5, 0.9] {
            for &d in &[1e-3, 1e-2, 5e-2] {
                let gap: f64 = pass_probability(&[d, 0.0, 0.0, 0.0], t, b) - pass_probability_approx(t);
                assert!(gap.abs() <= d * d / b);
            }
        }
    }

    #[test]
    fn isotropy_examples() {
        assert_eq!(isotropy(&[1.0; 4]), 0.0);
        assert_eq!(isotropy(&[1.0, -1.0, 0.0, 0.0]), 2.0);
        let th = [0.1, -0.4, 0.25, 0.7];
        let shifted: Vec<f64> = th.iter().map(|x| x + 3.5).collect();
        assert!((isotropy(&th) - isotropy(&shifted)).abs() < 1e-12);
        assert!((isotropy(&th) - isotropy(&[0.7, 0.1, 0.25, -0.4])).abs() < 1e-15);
    }

    #[test]
    fn probe_validation() {
        assert!(ProbeModel::new(vec![0.0; 3], 1.0).is_err());
        assert!(ProbeModel::new(vec![0.0; 4], 0.0).is_err());
        let p = ProbeModel::new(vec![0.0; 4], 1.0).unwrap();
        assert!((p.normalization() - (2.0 / std::f64::consts::PI).sqrt()).abs() < 1e-15);
        assert_eq!(p.position_variance(), 0.25);
    }
}
