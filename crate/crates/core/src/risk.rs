//! Risks of the point estimators: exact, semi-analytic and Monte-Carlo.
//!
//! Risk is expected squared error `E‖θ̂(Z) − θ‖²` at a fixed parameter.
//! The semi-analytic James-Stein risks keep the closed-form trace term and
//! only sample the expectation of the reciprocal quadratic form. Away from
//! the shrinkage target this has much lower variance than the full loss;
//! close to it, in low dimension, `1/q` is heavy-tailed and the advantage
//! disappears. Full Monte Carlo is kept as an independent check.
//!
//! Every Monte-Carlo routine runs repetition `i` on `rng_fork(rng, i)`, so
//! results do not depend on the number of worker threads.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::estimators::{EstimatorKind, GaussianPrior};
use crate::gauss::{mc_moments_with, mvn_sample_into, Moments, SeededRng, SpdMatrix};
use crate::scalar::{dist_sq, dot, Real};
use crate::sensing::ModelPoint;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RiskMethod {
    Exact,
    SemiAnalytic,
    MonteCarlo,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskEstimate<T> {
    pub value: T,
    pub std_error: T,
    pub reps: u64,
    pub method: RiskMethod,
}

impl<T: Real> RiskEstimate<T> {
    pub fn exact(value: T) -> Self {
        Self { value, std_error: T::zero(), reps: 1, method: RiskMethod::Exact }
    }

    fn sampled(value: T, std_error: T, reps: u64, method: RiskMethod) -> Self {
        Self { value: value.max(T::zero()), std_error, reps, method }
    }
}

/// A ratio of risks with its first-order propagated standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Advantage<T> {
    pub value: T,
    pub std_error: T,
}

impl<T: Real> Advantage<T> {
    /// Ratio of two independent advantages, e.g. a postselected over a
    /// plain one.
    pub fn ratio(&self, denominator: &Advantage<T>) -> Result<Advantage<T>> {
        if denominator.value == T::zero() {
            return Err(Error::DivisionByZero);
        }
        let value = self.value / denominator.value;
        let std_error = value * rel_err(self.value, self.std_error).hypot(rel_err(denominator.value, denominator.std_error));
        Ok(Advantage { value, std_error })
    }
}

fn rel_err<T: Real>(v: T, se: T) -> T {
    if se == T::zero() {
        T::zero()
    } else {
        se / v.abs()
    }
}

/// Advantage of estimator 1 over estimator 2: `R₂ / R₁`.
///
/// The two estimates are treated as independent for error propagation.
pub fn advantage<T: Real>(r1: &RiskEstimate<T>, r2: &RiskEstimate<T>) -> Result<Advantage<T>> {
    if r1.value == T::zero() {
        return Err(Error::DivisionByZero);
    }
    let value = r2.value / r1.value;
    let std_error = value * rel_err(r1.value, r1.std_error).hypot(rel_err(r2.value, r2.std_error));
    Ok(Advantage { value, std_error })
}

/// Outcome of a strict inequality checked against Monte-Carlo noise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Resolution {
    Holds,
    Violated,
    Unresolved,
}

/// Checks `lower < upper` with a margin of `k` combined standard errors.
pub fn strictly_less<T: Real>(lower: &RiskEstimate<T>, upper: &RiskEstimate<T>, k: T) -> Resolution {
    let gap = upper.value - lower.value;
    let se = lower.std_error.hypot(upper.std_error);
    if se == T::zero() {
        return if gap > T::zero() { Resolution::Holds } else { Resolution::Violated };
    }
    if gap >= k * se {
        Resolution::Holds
    } else if gap <= -k * se {
        Resolution::Violated
    } else {
        Resolution::Unresolved
    }
}

/// Whether two estimates of the same quantity agree within `k` combined
/// standard errors.
pub fn agree<T: Real>(a: &RiskEstimate<T>, b: &RiskEstimate<T>, k: T) -> bool {
    (a.value - b.value).abs() <= k * a.std_error.hypot(b.std_error)
}

/// `Tr(Γ)`, the MLE risk at every parameter.
pub fn risk_mle_exact<T: Real>(gamma: &SpdMatrix<T>) -> RiskEstimate<T> {
    RiskEstimate::exact(gamma.trace())
}

fn require_reps(reps: u64, min: u64) -> Result<()> {
    if reps < min {
        return Err(Error::invalid("reps", format!("need at least {min}, got {reps}")));
    }
    Ok(())
}

struct Scratch<T> {
    normal: Vec<T>,
    z: Vec<T>,
    est: Vec<T>,
    theta: Vec<T>,
}

impl<T: Real> Scratch<T> {
    fn new(n: usize) -> Self {
        Self { normal: vec![T::zero(); n], z: vec![T::zero(); n], est: vec![T::zero(); n], theta: vec![T::zero(); n] }
    }
}

/// Full Monte-Carlo risk: mean of `‖θ̂(Z) − θ‖²` over `Z ~ N(loc, Γ_N)`.
pub fn risk_mc<T: Real>(
    kind: &EstimatorKind<T>,
    point: &ModelPoint<T>,
    reps: u64,
    rng: &SeededRng,
) -> Result<RiskEstimate<T>> {
    require_reps(reps, 2)?;
    let n = point.dim();
    check_dim(n, point.loc.len())?;
    let est = kind.bind(&point.gamma_n)?;
    let m = mc_moments_with(reps, rng, || Scratch::new(n), |s, r| {
        mvn_sample_into(&point.loc, &point.gamma_n, r, &mut s.normal, &mut s.z).expect("dimensions checked");
        est.estimate_into(&s.z, &mut s.est);
        dist_sq(&s.est, &point.theta)
    });
    Ok(RiskEstimate::sampled(m.mean(), m.std_error(), reps, RiskMethod::MonteCarlo))
}

/// Moments of `1 / [(Y − c(Y))ᵀ Γ⁻² (Y − c(Y))]` for `Y ~ N(mean, law)`,
/// where `c` is either a fixed target or the component mean of `Y`.
fn reciprocal_quad_moments<T: Real>(
    mean: &[T],
    law: &SpdMatrix<T>,
    gamma: &SpdMatrix<T>,
    target: Target<'_, T>,
    reps: u64,
    rng: &SeededRng,
) -> Moments<T> {
    let n = mean.len();
    mc_moments_with(reps, rng, || Scratch::new(n), |s, r| {
        mvn_sample_into(mean, law, r, &mut s.normal, &mut s.z).expect("dimensions checked");
        match target {
            Target::Fixed(nu) => {
                for ((d, &z), &c) in s.est.iter_mut().zip(&s.z).zip(nu) {
                    *d = z - c;
                }
            }
            Target::ComponentMean => {
                let m = s.z.iter().copied().sum::<T>() / T::of_usize(n);
                for (d, &z) in s.est.iter_mut().zip(&s.z) {
                    *d = z - m;
                }
            }
        }
        gamma.solve_in_place(&mut s.est);
        dot(&s.est, &s.est).recip()
    })
}

#[derive(Clone, Copy)]
enum Target<'a, T> {
    Fixed(&'a [T]),
    ComponentMean,
}

fn semi_analytic<T: Real>(trace: T, coeff: usize, m: &Moments<T>, reps: u64) -> RiskEstimate<T> {
    let c = T::of_usize(coeff * coeff);
    RiskEstimate::sampled(trace - c * m.mean(), c * m.std_error(), reps, RiskMethod::SemiAnalytic)
}

/// `Tr(Γ) − (n−2)²·E[1/((Z−ν)ᵀΓ⁻²(Z−ν))]`, `Z ~ N(θ, Γ)`, with the
/// expectation sampled.
pub fn risk_js_semianalytic<T: Real>(
    theta: &[T],
    gamma: &SpdMatrix<T>,
    nu: &[T],
    reps: u64,
    rng: &SeededRng,
) -> Result<RiskEstimate<T>> {
    let n = theta.len();
    if n < 3 {
        return Err(Error::DimensionTooSmall { required: 3, found: n });
    }
    check_dim(gamma.dim(), n)?;
    check_dim(n, nu.len())?;
    require_reps(reps, 2)?;
    let m = reciprocal_quad_moments(theta, gamma, gamma, Target::Fixed(nu), reps, rng);
    Ok(semi_analytic(gamma.trace(), n - 2, &m, reps))
}

/// `Tr(Γ) − (n−3)²·E[1/((Z−Z_m)ᵀΓ⁻²(Z−Z_m))]`, `Z ~ N(θ, Γ)`.
pub fn risk_mjs_semianalytic<T: Real>(
    theta: &[T],
    gamma: &SpdMatrix<T>,
    reps: u64,
    rng: &SeededRng,
) -> Result<RiskEstimate<T>> {
    let n = theta.len();
    if n < 4 {
        return Err(Error::DimensionTooSmall { required: 4, found: n });
    }
    check_dim(gamma.dim(), n)?;
    require_reps(reps, 2)?;
    let m = reciprocal_quad_moments(theta, gamma, gamma, Target::ComponentMean, reps, rng);
    Ok(semi_analytic(gamma.trace(), n - 3, &m, reps))
}

/// Semi-analytic risk for any estimator kind: exact for the MLE, sampled
/// expectation for the James-Stein variants, full Monte Carlo for Bayes.
pub fn risk_default<T: Real>(
    kind: &EstimatorKind<T>,
    point: &ModelPoint<T>,
    reps: u64,
    rng: &SeededRng,
) -> Result<RiskEstimate<T>> {
    match kind {
        EstimatorKind::Mle => Ok(risk_mle_exact(&point.gamma_n)),
        EstimatorKind::NuJs(cfg) => risk_js_semianalytic(&point.theta, &point.gamma_n, &cfg.nu, reps, rng),
        EstimatorKind::MeanJs => risk_mjs_semianalytic(&point.theta, &point.gamma_n, reps, rng),
        EstimatorKind::Bayes(_) => risk_mc(kind, point, reps, rng),
    }
}

/// Bayes risk by joint sampling `ϑ ~ N(θ₀, Ξ)`, `Z ~ N(ϑ, Γ)`.
pub fn bayes_risk_mc<T: Real>(
    kind: &EstimatorKind<T>,
    prior: &GaussianPrior<T>,
    gamma: &SpdMatrix<T>,
    reps: u64,
    rng: &SeededRng,
) -> Result<RiskEstimate<T>> {
    require_reps(reps, 2)?;
    let n = prior.dim();
    check_dim(gamma.dim(), n)?;
    let est = kind.bind(gamma)?;
    let m = mc_moments_with(reps, rng, || Scratch::new(n), |s, r| {
        mvn_sample_into(&prior.theta0, &prior.xi, r, &mut s.normal, &mut s.theta).expect("dimensions checked");
        mvn_sample_into(&s.theta, gamma, r, &mut s.normal, &mut s.z).expect("dimensions checked");
        est.estimate_into(&s.z, &mut s.est);
        dist_sq(&s.est, &s.theta)
    });
    Ok(RiskEstimate::sampled(m.mean(), m.std_error(), reps, RiskMethod::MonteCarlo))
}

/// `Tr[Γ²(Γ+Ξ)⁻¹]`, the Bayes estimator's improvement over the MLE.
pub fn bayes_gain_trace<T: Real>(gamma: &SpdMatrix<T>, xi: &SpdMatrix<T>) -> Result<T> {
    let total = gamma.try_add(xi)?;
    let solved = total.solve_matrix(gamma.row_major())?;
    let n = gamma.dim();
    let mut tr = T::zero();
    for i in 0..n {
        for j in 0..n {
            tr += gamma.get(i, j) * solved[j * n + i];
        }
    }
    Ok(tr)
}

/// Closed-form Bayes risks:
///
/// | estimator | Bayes risk |
/// |-----------|------------|
/// | MLE       | `Tr(Γ)` |
/// | JS        | `Tr(Γ) − (n−2)²·E[1/((Y−ν)ᵀΓ⁻²(Y−ν))]`, `Y ~ N(θ₀, Γ+Ξ)` |
/// | mean-JS   | `Tr(Γ) − (n−3)²·E[1/((Y−Y_m)ᵀΓ⁻²(Y−Y_m))]` |
/// | Bayes     | `Tr(Γ) − Tr[Γ²(Γ+Ξ)⁻¹]` |
///
/// Only the James-Stein expectations are sampled, over the marginal law of
/// the data.
pub fn bayes_risk_table<T: Real>(
    kind: &EstimatorKind<T>,
    gamma: &SpdMatrix<T>,
    prior: &GaussianPrior<T>,
    reps: u64,
    rng: &SeededRng,
) -> Result<RiskEstimate<T>> {
    let n = prior.dim();
    check_dim(gamma.dim(), n)?;
    kind.check_dim(n)?;
    let trace = gamma.trace();
    match kind {
        EstimatorKind::Mle => Ok(RiskEstimate::exact(trace)),
        EstimatorKind::Bayes(own) => {
            // the table row assumes the estimator's prior is the true one
            check_dim(n, own.dim())?;
            Ok(RiskEstimate::exact(trace - bayes_gain_trace(gamma, &prior.xi)?))
        }
        EstimatorKind::NuJs(cfg) => {
            require_reps(reps, 2)?;
            let marginal = gamma.try_add(&prior.xi)?;
            let m = reciprocal_quad_moments(&prior.theta0, &marginal, gamma, Target::Fixed(&cfg.nu), reps, rng);
            Ok(semi_analytic(trace, n - 2, &m, reps))
        }
        EstimatorKind::MeanJs => {
            require_reps(reps, 2)?;
            let marginal = gamma.try_add(&prior.xi)?;
            let m = reciprocal_quad_moments(&prior.theta0, &marginal, gamma, Target::ComponentMean, reps, rng);
            Ok(semi_analytic(trace, n - 3, &m, reps))
        }
    }
}

/// James-Stein advantage `R(MLE_N)/R(JS_N)` over a grid of resource counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdvantageCurve<T> {
    pub n_values: Vec<u64>,
    pub ad_values: Vec<T>,
    pub ad_std_errors: Vec<T>,
    pub label: String,
}

impl<T: Real> AdvantageCurve<T> {
    pub fn new(label: impl Into<String>, n_values: Vec<u64>, points: &[Advantage<T>]) -> Result<Self> {
        check_dim(n_values.len(), points.len())?;
        if n_values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("n_values", "must be strictly ascending"));
        }
        if points.iter().any(|p| !(p.value > T::zero())) {
            return Err(Error::invalid("ad_values", "must be positive"));
        }
        Ok(Self {
            n_values,
            ad_values: points.iter().map(|p| p.value).collect(),
            ad_std_errors: points.iter().map(|p| p.std_error).collect(),
            label: label.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.n_values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.n_values.is_empty()
    }
}

/// Least-squares slope of `log d_N` against `log N`, where
/// `d_N = 1 − R(JS_N)/R(MLE_N) = 1 − 1/AD_N` is the relative risk gap.
pub fn scaling_exponent<T: Real>(curve: &AdvantageCurve<T>) -> Result<T> {
    if curve.len() < 5 {
        return Err(Error::invalid("curve", format!("need at least 5 points, got {}", curve.len())));
    }
    let mut xs = Vec::with_capacity(curve.len());
    let mut ys = Vec::with_capacity(curve.len());
    for (i, (&n, &ad)) in curve.n_values.iter().zip(&curve.ad_values).enumerate() {
        let gap = T::one() - ad.recip();
        if !(gap > T::zero()) {
            return Err(Error::NonPositiveGap { index: i, gap: gap.to_f64().unwrap_or(f64::NAN) });
        }
        xs.push(T::lit(n as f64).ln());
        ys.push(gap.ln());
    }
    Ok(ols_slope(&xs, &ys))
}

fn ols_slope<T: Real>(xs: &[T], ys: &[T]) -> T {
    let k = T::of_usize(xs.len());
    let mx = xs.iter().copied().sum::<T>() / k;
    let my = ys.iter().copied().sum::<T>() / k;
    let sxy: T = xs.iter().zip(ys).map(|(&x, &y)| (x - mx) * (y - my)).sum();
    let sxx: T = xs.iter().map(|&x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}
