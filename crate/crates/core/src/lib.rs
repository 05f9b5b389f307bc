//! Shrinkage estimation for Gaussian sensing models.
//!
//! The crate is organised in layers:
//!
//! - [`gauss`]: seeded random streams, validated covariance matrices and
//!   multivariate normal sampling.
//! - [`estimators`]: maximum-likelihood, James-Stein (fixed-target and
//!   mean-target) and Bayes point estimators of a Gaussian mean.
//! - [`sensing`]: the effective Gaussian law seen by the estimators for
//!   separate-copy and sequential strategies, with and without a random
//!   displacement noise channel.
//! - [`risk`]: exact, semi-analytic and Monte-Carlo risks, advantage ratios,
//!   Bayes risks and scaling-exponent fits.
//! - [`postselect`]: postselective filtering of a Gaussian position probe,
//!   an exact rejection sampler and the adaptive filtering strategy.
//!
//! Every numeric routine is generic over [`Real`]; the `*F64` aliases at the
//! crate root fix the scalar to `f64`, which is what the experiment harness
//! uses.

pub mod error;
pub mod estimators;
pub mod gauss;
pub mod postselect;
pub mod risk;
pub mod scalar;
pub mod sensing;

pub use error::{Error, Result};
pub use estimators::{EstimatorKind, GaussianPrior, NuJsConfig};
pub use gauss::{SeededRng, SpdMatrix};
pub use postselect::{FilterState, PostEstimator, ProbeModel, StrategyConfig, StrategyTrace};
pub use risk::{Advantage, AdvantageCurve, RiskEstimate, RiskMethod};
pub use scalar::Real;
pub use sensing::{GaussianState, ModelPoint, Strategy};

pub type SpdMatrixF64 = SpdMatrix<f64>;
pub type SpdMatrixF32 = SpdMatrix<f32>;
pub type EstimatorKindF64 = EstimatorKind<f64>;
pub type GaussianPriorF64 = GaussianPrior<f64>;
pub type ModelPointF64 = ModelPoint<f64>;
pub type GaussianStateF64 = GaussianState<f64>;
pub type RiskEstimateF64 = RiskEstimate<f64>;
pub type AdvantageF64 = Advantage<f64>;
pub type AdvantageCurveF64 = AdvantageCurve<f64>;
pub type ProbeModelF64 = ProbeModel<f64>;
pub type StrategyTraceF64 = StrategyTrace<f64>;
