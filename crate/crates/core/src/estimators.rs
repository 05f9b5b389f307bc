//! Point estimators of the mean of `N(θ, Σ)` with known `Σ`.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::gauss::SpdMatrix;
use crate::scalar::{dot, Real};

/// Quadratic forms below this are treated as an exact hit on the shrinkage
/// target, where the estimator returns its input.
pub const DEGENERATE_QUAD_FORM: f64 = 1e-30;

/// Shrinkage target for the fixed-target James-Stein estimator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NuJsConfig<T> {
    pub nu: Vec<T>,
}

impl<T: Real> NuJsConfig<T> {
    pub fn origin(dim: usize) -> Self {
        Self { nu: vec![T::zero(); dim] }
    }
}

/// Prior `θ ~ N(theta0, xi)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real + Serialize", deserialize = "T: Real + Deserialize<'de>"))]
pub struct GaussianPrior<T> {
    pub theta0: Vec<T>,
    pub xi: SpdMatrix<T>,
}

impl<T: Real> GaussianPrior<T> {
    pub fn new(theta0: Vec<T>, xi: SpdMatrix<T>) -> Result<Self> {
        check_dim(xi.dim(), theta0.len())?;
        Ok(Self { theta0, xi })
    }

    pub fn dim(&self) -> usize {
        self.theta0.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real + Serialize", deserialize = "T: Real + Deserialize<'de>"))]
pub enum EstimatorKind<T> {
    Mle,
    NuJs(NuJsConfig<T>),
    MeanJs,
    Bayes(GaussianPrior<T>),
}

impl<T: Real> EstimatorKind<T> {
    /// Fixed-target James-Stein shrinking towards the origin.
    pub fn js_origin(dim: usize) -> Self {
        EstimatorKind::NuJs(NuJsConfig::origin(dim))
    }

    pub fn label(&self) -> &'static str {
        match self {
            EstimatorKind::Mle => "mle",
            EstimatorKind::NuJs(_) => "js",
            EstimatorKind::MeanJs => "mjs",
            EstimatorKind::Bayes(_) => "bayes",
        }
    }

    /// Checks the use-site dimension constraints for data of dimension `n`.
    pub fn check_dim(&self, n: usize) -> Result<()> {
        match self {
            EstimatorKind::Mle => Ok(()),
            EstimatorKind::NuJs(cfg) => {
                if n < 3 {
                    return Err(Error::DimensionTooSmall { required: 3, found: n });
                }
                check_dim(n, cfg.nu.len())
            }
            EstimatorKind::MeanJs => {
                if n < 4 {
                    return Err(Error::DimensionTooSmall { required: 4, found: n });
                }
                Ok(())
            }
            EstimatorKind::Bayes(prior) => check_dim(n, prior.dim()),
        }
    }

    /// Applies the estimator to one observation `z` with data covariance `cov`.
    pub fn estimate(&self, z: &[T], cov: &SpdMatrix<T>) -> Result<Vec<T>> {
        match self {
            EstimatorKind::Mle => Ok(estimate_mle(z)),
            EstimatorKind::NuJs(cfg) => estimate_nu_js(z, cov, &cfg.nu),
            EstimatorKind::MeanJs => estimate_mjs(z, cov),
            EstimatorKind::Bayes(prior) => estimate_bayes(z, cov, prior),
        }
    }

    /// Binds the estimator to a fixed data covariance, precomputing what
    /// can be reused across many observations.
    pub fn bind<'a>(&'a self, cov: &'a SpdMatrix<T>) -> Result<BoundEstimator<'a, T>> {
        self.check_dim(cov.dim())?;
        Ok(match self {
            EstimatorKind::Mle => BoundEstimator::Mle,
            EstimatorKind::NuJs(cfg) => BoundEstimator::NuJs { cov, nu: &cfg.nu },
            EstimatorKind::MeanJs => BoundEstimator::MeanJs { cov },
            EstimatorKind::Bayes(prior) => BoundEstimator::Bayes(BayesGain::new(cov, prior)?),
        })
    }
}

/// An estimator with its covariance-dependent pieces resolved.
#[derive(Debug, Clone)]
pub enum BoundEstimator<'a, T> {
    Mle,
    NuJs { cov: &'a SpdMatrix<T>, nu: &'a [T] },
    MeanJs { cov: &'a SpdMatrix<T> },
    Bayes(BayesGain<T>),
}

impl<T: Real> BoundEstimator<'_, T> {
    /// Writes the estimate of `z` into `out`. Dimensions are assumed checked
    /// at bind time.
    pub fn estimate_into(&self, z: &[T], out: &mut [T]) {
        match self {
            BoundEstimator::Mle => out.copy_from_slice(z),
            BoundEstimator::NuJs { cov, nu } => {
                for ((o, &zi), &ni) in out.iter_mut().zip(z).zip(nu.iter()) {
                    *o = zi - ni;
                }
                shrink_in_place(z, cov, T::of_usize(z.len() - 2), out);
            }
            BoundEstimator::MeanJs { cov } => {
                let m = mean(z);
                for (o, &zi) in out.iter_mut().zip(z) {
                    *o = zi - m;
                }
                shrink_in_place(z, cov, T::of_usize(z.len() - 3), out);
            }
            BoundEstimator::Bayes(gain) => gain.apply_into(z, out),
        }
    }
}

/// On entry `work` holds the deviation `d = z − target`; on exit it holds
/// `z − c·Σ⁻¹d / (dᵀΣ⁻²d)`, or `z` when the quadratic form is degenerate.
fn shrink_in_place<T: Real>(z: &[T], cov: &SpdMatrix<T>, c: T, work: &mut [T]) {
    cov.solve_in_place(work);
    let q = dot(work, work);
    if q < T::lit(DEGENERATE_QUAD_FORM) {
        work.copy_from_slice(z);
        return;
    }
    let k = c / q;
    for (w, &zi) in work.iter_mut().zip(z) {
        *w = zi - k * *w;
    }
}

fn mean<T: Real>(z: &[T]) -> T {
    z.iter().copied().sum::<T>() / T::of_usize(z.len())
}

pub fn estimate_mle<T: Real>(z: &[T]) -> Vec<T> {
    z.to_vec()
}

/// `z − (n−2)·Σ⁻¹(z−ν) / [(z−ν)ᵀΣ⁻²(z−ν)]`, no positive-part clipping.
pub fn estimate_nu_js<T: Real>(z: &[T], cov: &SpdMatrix<T>, nu: &[T]) -> Result<Vec<T>> {
    let n = z.len();
    if n < 3 {
        return Err(Error::DimensionTooSmall { required: 3, found: n });
    }
    check_dim(cov.dim(), n)?;
    check_dim(n, nu.len())?;
    let mut out = crate::scalar::sub(z, nu);
    shrink_in_place(z, cov, T::of_usize(n - 2), &mut out);
    Ok(out)
}

/// Constant vector of the component mean.
pub fn mean_vector<T: Real>(z: &[T]) -> Vec<T> {
    if z.is_empty() {
        return Vec::new();
    }
    vec![mean(z); z.len()]
}

/// `z − (n−3)·Σ⁻¹(z−z_m) / [(z−z_m)ᵀΣ⁻²(z−z_m)]` with `z_m` the mean vector.
pub fn estimate_mjs<T: Real>(z: &[T], cov: &SpdMatrix<T>) -> Result<Vec<T>> {
    let n = z.len();
    if n < 4 {
        return Err(Error::DimensionTooSmall { required: 4, found: n });
    }
    check_dim(cov.dim(), n)?;
    let mut out = crate::scalar::sub(z, &mean_vector(z));
    shrink_in_place(z, cov, T::of_usize(n - 3), &mut out);
    Ok(out)
}

/// Posterior mean `(Γ⁻¹+Ξ⁻¹)⁻¹(Γ⁻¹z + Ξ⁻¹θ₀)`.
pub fn estimate_bayes<T: Real>(z: &[T], gamma: &SpdMatrix<T>, prior: &GaussianPrior<T>) -> Result<Vec<T>> {
    check_dim(gamma.dim(), z.len())?;
    let gain = BayesGain::new(gamma, prior)?;
    let mut out = vec![T::zero(); z.len()];
    gain.apply_into(z, &mut out);
    Ok(out)
}

/// Posterior mean in gain form: `θ₀ + Ξ(Γ+Ξ)⁻¹(z − θ₀)`.
///
/// Algebraically equal to `(Γ⁻¹+Ξ⁻¹)⁻¹(Γ⁻¹z + Ξ⁻¹θ₀)` and needs a single
/// factorization of `Γ+Ξ`.
#[derive(Debug, Clone, PartialEq)]
pub struct BayesGain<T> {
    theta0: Vec<T>,
    gain: Vec<T>,
}

impl<T: Real> BayesGain<T> {
    pub fn new(gamma: &SpdMatrix<T>, prior: &GaussianPrior<T>) -> Result<Self> {
        check_dim(gamma.dim(), prior.dim())?;
        let n = gamma.dim();
        let total = gamma.try_add(&prior.xi)?;
        // (Γ+Ξ)⁻¹Ξ, whose transpose is the gain Ξ(Γ+Ξ)⁻¹.
        let solved = total.solve_matrix(prior.xi.row_major())?;
        let mut gain = vec![T::zero(); n * n];
        for i in 0..n {
            for j in 0..n {
                gain[i * n + j] = solved[j * n + i];
            }
        }
        Ok(Self { theta0: prior.theta0.clone(), gain })
    }

    /// Row-major gain matrix `Ξ(Γ+Ξ)⁻¹`.
    pub fn matrix(&self) -> &[T] {
        &self.gain
    }

    pub fn apply_into(&self, z: &[T], out: &mut [T]) {
        let n = z.len();
        for i in 0..n {
            let row = &self.gain[i * n..(i + 1) * n];
            let mut s = self.theta0[i];
            for j in 0..n {
                s += row[j] * (z[j] - self.theta0[j]);
            }
            out[i] = s;
        }
    }
}
