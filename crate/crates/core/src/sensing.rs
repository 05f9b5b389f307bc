//! Effective Gaussian sampling laws for the sensing strategies.
//!
//! Each strategy is reduced to the exact law `N(θ, Γ_N)` of the statistic
//! handed to the estimators; nothing at the level of phase space is
//! simulated.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::gauss::SpdMatrix;
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Strategy {
    /// `N` probes measured separately, sample mean: `Γ = Σ/N`.
    SeparateNoiseless,
    /// One probe, unitary applied `N` times, outcome divided by `N`: `Γ = Σ/N²`.
    SequentialNoiseless,
    /// Separate probes through the noise channel: `Γ = (Σ+Δ)/N`.
    SeparateNoisy,
    /// One probe through `N` noisy channel uses: `Γ = Σ/N² + Δ/N`.
    SequentialNoisy,
}

impl Strategy {
    pub const ALL: [Strategy; 4] = [
        Strategy::SeparateNoiseless,
        Strategy::SequentialNoiseless,
        Strategy::SeparateNoisy,
        Strategy::SequentialNoisy,
    ];

    pub fn is_noisy(self) -> bool {
        matches!(self, Strategy::SeparateNoisy | Strategy::SequentialNoisy)
    }

    pub fn is_sequential(self) -> bool {
        matches!(self, Strategy::SequentialNoiseless | Strategy::SequentialNoisy)
    }
}

/// Gaussian state summarized by its first two moments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real + Serialize", deserialize = "T: Real + Deserialize<'de>"))]
pub struct GaussianState<T> {
    pub mean: Vec<T>,
    pub cov: SpdMatrix<T>,
}

impl<T: Real> GaussianState<T> {
    pub fn new(mean: Vec<T>, cov: SpdMatrix<T>) -> Result<Self> {
        check_dim(cov.dim(), mean.len())?;
        Ok(Self { mean, cov })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

/// Parameter value together with the law `N(loc, Γ_N)` of the data the
/// estimators see.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real + Serialize", deserialize = "T: Real + Deserialize<'de>"))]
pub struct ModelPoint<T> {
    pub theta: Vec<T>,
    pub loc: Vec<T>,
    pub gamma_n: SpdMatrix<T>,
    pub n_resources: u64,
}

impl<T: Real> ModelPoint<T> {
    /// A single observation `Z ~ N(θ, Γ)`.
    pub fn single(theta: Vec<T>, gamma: SpdMatrix<T>) -> Result<Self> {
        check_dim(gamma.dim(), theta.len())?;
        Ok(Self { loc: theta.clone(), theta, gamma_n: gamma, n_resources: 1 })
    }

    pub fn dim(&self) -> usize {
        self.theta.len()
    }
}

/// Effective covariance `Γ_N` for a strategy with `n` resources.
pub fn effective_covariance<T: Real>(
    strategy: Strategy,
    sigma: &SpdMatrix<T>,
    delta: Option<&SpdMatrix<T>>,
    n: u64,
) -> Result<SpdMatrix<T>> {
    if n == 0 {
        return Err(Error::invalid("N", "must be at least 1"));
    }
    let delta = match (strategy.is_noisy(), delta) {
        (true, None) => return Err(Error::MissingNoiseMatrix),
        (false, Some(_)) => return Err(Error::UnexpectedNoiseMatrix),
        (_, d) => d,
    };
    if let Some(d) = delta {
        check_dim(sigma.dim(), d.dim())?;
    }
    let nf = T::lit(n as f64);
    match strategy {
        Strategy::SeparateNoiseless => sigma.scale(nf.recip()),
        Strategy::SequentialNoiseless => sigma.scale((nf * nf).recip()),
        Strategy::SeparateNoisy => sigma.try_add(delta.unwrap())?.scale(nf.recip()),
        Strategy::SequentialNoisy => sigma.scale((nf * nf).recip())?.try_add(&delta.unwrap().scale(nf.recip())?),
    }
}

pub fn model_distribution<T: Real>(
    strategy: Strategy,
    theta: &[T],
    sigma: &SpdMatrix<T>,
    delta: Option<&SpdMatrix<T>>,
    n: u64,
) -> Result<ModelPoint<T>> {
    check_dim(sigma.dim(), theta.len())?;
    let gamma_n = effective_covariance(strategy, sigma, delta, n)?;
    Ok(ModelPoint { theta: theta.to_vec(), loc: theta.to_vec(), gamma_n, n_resources: n })
}

/// One use of the random-displacement channel: mean `r+θ`, covariance `A+Δ`.
pub fn apply_noise_channel<T: Real>(
    state: &GaussianState<T>,
    theta: &[T],
    delta: &SpdMatrix<T>,
) -> Result<GaussianState<T>> {
    check_dim(state.dim(), theta.len())?;
    check_dim(state.dim(), delta.dim())?;
    Ok(GaussianState { mean: crate::scalar::add(&state.mean, theta), cov: state.cov.try_add(delta)? })
}

/// `n` channel uses in closed form: mean `r+nθ`, covariance `A+nΔ`.
pub fn apply_noise_channel_n<T: Real>(
    state: &GaussianState<T>,
    theta: &[T],
    delta: &SpdMatrix<T>,
    n: u64,
) -> Result<GaussianState<T>> {
    check_dim(state.dim(), theta.len())?;
    check_dim(state.dim(), delta.dim())?;
    if n == 0 {
        return Ok(state.clone());
    }
    let nf = T::lit(n as f64);
    let mean = state.mean.iter().zip(theta).map(|(&r, &t)| r + nf * t).collect();
    Ok(GaussianState { mean, cov: state.cov.try_add(&delta.scale(nf)?)? })
}

/// Law of the joint-quadrature outcome with ancilla covariance `Ã`:
/// `Z|θ ~ N(θ, A+Ã)`.
pub fn measurement_distribution<T: Real>(
    a: &SpdMatrix<T>,
    a_anc: &SpdMatrix<T>,
    theta: &[T],
) -> Result<ModelPoint<T>> {
    check_dim(a.dim(), a_anc.dim())?;
    check_dim(a.dim(), theta.len())?;
    ModelPoint::single(theta.to_vec(), a.try_add(a_anc)?)
}

/// Largest entrywise deviation of `M₁…M₄` from `(A+Ã)⁻¹`.
///
/// The four matrices are built literally from their defining products with
/// `S = A⁻¹+Ã⁻¹`:
/// `M₁ = A⁻¹ − A⁻¹S⁻¹A⁻¹`, `M₂ = Ã⁻¹ − Ã⁻¹S⁻¹Ã⁻¹`,
/// `M₃ = Ã⁻¹S⁻¹A⁻¹`, `M₄ = A⁻¹S⁻¹Ã⁻¹`.
pub fn lemma1_check<T: Real>(a: &SpdMatrix<T>, a_anc: &SpdMatrix<T>) -> Result<T> {
    check_dim(a.dim(), a_anc.dim())?;
    let n = a.dim();
    let ai = a.inverse();
    let bi = a_anc.inverse();
    let s = SpdMatrix::from_row_major(n, ai.iter().zip(&bi).map(|(&x, &y)| x + y).collect())?;
    let si = s.inverse();
    let target = a.try_add(a_anc)?.inverse();

    let m1 = sub_mat(&ai, &matmul3(n, &ai, &si, &ai));
    let m2 = sub_mat(&bi, &matmul3(n, &bi, &si, &bi));
    let m3 = matmul3(n, &bi, &si, &ai);
    let m4 = matmul3(n, &ai, &si, &bi);

    Ok([m1, m2, m3, m4].iter().fold(T::zero(), |worst, m| worst.max(max_abs_diff(m, &target))))
}

fn matmul<T: Real>(n: usize, a: &[T], b: &[T]) -> Vec<T> {
    let mut out = vec![T::zero(); n * n];
    for i in 0..n {
        for k in 0..n {
            let aik = a[i * n + k];
            for j in 0..n {
                out[i * n + j] += aik * b[k * n + j];
            }
        }
    }
    out
}

fn matmul3<T: Real>(n: usize, a: &[T], b: &[T], c: &[T]) -> Vec<T> {
    matmul(n, &matmul(n, a, b), c)
}

fn sub_mat<T: Real>(a: &[T], b: &[T]) -> Vec<T> {
    a.iter().zip(b).map(|(&x, &y)| x - y).collect()
}

fn max_abs_diff<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |m, (&x, &y)| m.max((x - y).abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn id(n: usize) -> SpdMatrix<f64> {
        SpdMatrix::identity(n)
    }

    #[test]
    fn strategy_covariances() {
        let sigma = SpdMatrix::scaled_identity(4, 4.0);
        let theta = [0.5, -0.2, 0.3, 0.1];
        let p = model_distribution(Strategy::SequentialNoiseless, &theta, &sigma, None, 2).unwrap();
        assert!(p.gamma_n.max_abs_diff(&id(4)) < 1e-15);
        assert_eq!(p.loc, theta.to_vec());

        let p = model_distribution(Strategy::SeparateNoisy, &theta, &sigma, Some(&sigma), 1).unwrap();
        assert!(p.gamma_n.max_abs_diff(&SpdMatrix::scaled_identity(4, 8.0)) < 1e-15);

        let odd = SpdMatrix::from_rows(&[vec![2.0, 0.3], vec![0.3, 1.0]]).unwrap();
        let p = model_distribution(Strategy::SeparateNoiseless, &[0.0, 1.0], &odd, None, 1).unwrap();
        assert_eq!(p.gamma_n, odd);

        let p = model_distribution(Strategy::SequentialNoisy, &theta, &sigma, Some(&sigma), 10).unwrap();
        assert!(p.gamma_n.max_abs_diff(&SpdMatrix::scaled_identity(4, 0.04 + 0.4)) < 1e-15);
    }

    #[test]
    fn noise_matrix_presence_is_checked() {
        let sigma = id(3);
        assert_eq!(
            model_distribution(Strategy::SequentialNoisy, &[0.0; 3], &sigma, None, 3),
            Err(Error::MissingNoiseMatrix)
        );
        assert_eq!(
            model_distribution(Strategy::SeparateNoiseless, &[0.0; 3], &sigma, Some(&sigma), 3),
            Err(Error::UnexpectedNoiseMatrix)
        );
        assert!(matches!(
            model_distribution(Strategy::SeparateNoisy, &[0.0; 3], &sigma, Some(&id(2)), 3),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(model_distribution(Strategy::SeparateNoiseless, &[0.0; 3], &sigma, None, 0).is_err());
    }

    #[test]
    fn channel_rules() {
        let state = GaussianState::new(vec![0.0, 0.0], id(2)).unwrap();
        let out = apply_noise_channel(&state, &[1.0, 0.0], &id(2)).unwrap();
        assert_eq!(out.mean, vec![1.0, 0.0]);
        assert!(out.cov.max_abs_diff(&SpdMatrix::scaled_identity(2, 2.0)) < 1e-15);

        let tiny = SpdMatrix::scaled_identity(2, 1e-12);
        let out = apply_noise_channel(&state, &[0.0, 0.0], &tiny).unwrap();
        assert!(out.cov.max_abs_diff(&state.cov) < 1e-10);
        assert_eq!(out.mean, state.mean);
    }

    #[test]
    fn channel_composition_matches_closed_form() {
        let a = SpdMatrix::<f64>::from_rows(&[vec![1.0, 0.2], vec![0.2, 0.5]]).unwrap();
        let delta = SpdMatrix::from_rows(&[vec![0.3, -0.1], vec![-0.1, 0.4]]).unwrap();
        let theta = [0.7, -1.1];
        let mut state = GaussianState::new(vec![0.1, 0.2], a).unwrap();
        let closed = apply_noise_channel_n(&state, &theta, &delta, 3).unwrap();
        for _ in 0..3 {
            state = apply_noise_channel(&state, &theta, &delta).unwrap();
        }
        assert!(state.cov.max_abs_diff(&closed.cov) < 1e-14);
        for (x, y) in state.mean.iter().zip(&closed.mean) {
            assert!((x - y).abs() < 1e-14);
        }
    }

    #[test]
    fn measurement_law_adds_ancilla() {
        let p = measurement_distribution(&id(4), &id(4), &[1.0; 4]).unwrap();
        assert!(p.gamma_n.max_abs_diff(&SpdMatrix::scaled_identity(4, 2.0)) < 1e-15);
        assert_eq!(p.n_resources, 1);

        let a = SpdMatrix::diagonal(&[1.0, 2.0]).unwrap();
        let p = measurement_distribution(&a, &SpdMatrix::scaled_identity(2, 1e-12), &[0.0; 2]).unwrap();
        assert!(p.gamma_n.max_abs_diff(&a) < 1e-11);

        let p = measurement_distribution(&a, &SpdMatrix::diagonal(&[3.0, 4.0]).unwrap(), &[0.0; 2]).unwrap();
        assert!(p.gamma_n.max_abs_diff(&SpdMatrix::diagonal(&[4.0, 6.0]).unwrap()) < 1e-15);
    }

    #[test]
    fn lemma1_hand_cases() {
        assert!(lemma1_check(&id(2), &id(2)).unwrap() <= 1e-12);
        let two = SpdMatrix::scaled_identity(2, 2.0);
        assert!(lemma1_check(&two, &id(2)).unwrap() <= 1e-12);
        assert!(lemma1_check(&two, &id(3)).is_err());
    }
}
