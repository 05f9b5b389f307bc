use rand::Rng;

use super::check_transmission;
use crate::error::{check_dim, Error, Result};
use crate::gauss::{standard_normal, SeededRng};
use crate::scalar::{dist_sq, norm_sq, Real};

/// Density of the measured position after passing the filter:
/// `Cⁿ·|e^{−‖x−θ‖²/B} − (1−t)e^{−‖δ‖²/2B}e^{−‖x−θ₀‖²/B}|² / ‖K|ψ_θ⟩‖²`.
pub fn postselected_pdf<T: Real>(x: &[T], theta: &[T], theta0: &[T], t: T, b: T) -> T {
    let n = x.len();
    let d2 = dist_sq(theta, theta0);
    let c_n = (T::lit(2.0) / (T::lit(std::f64::consts::PI) * b)).powf(T::of_usize(n) / T::lit(2.0));
    let a = (-dist_sq(x, theta) / b).exp();
    let c = (T::one() - t) * (-d2 / (T::lit(2.0) * b)).exp() * (-dist_sq(x, theta0) / b).exp();
    let pass = T::one() + (t * t - T::one()) * (-d2 / b).exp();
    c_n * (a - c) * (a - c) / pass
}

/// Envelope `M = (1 + (1−t)²e^{−‖δ‖²/B}) / (1 + (t²−1)e^{−‖δ‖²/B})` with
/// `f ≤ M·g`.
pub fn envelope_constant<T: Real>(delta: &[T], t: T, b: T) -> T {
    let e = (-norm_sq(delta) / b).exp();
    let one_minus_t = T::one() - t;
    (T::one() + one_minus_t * one_minus_t * e) / (T::one() + (t * t - T::one()) * e)
}

/// Weight `p = 1/(1 + (1−t)²e^{−‖δ‖²/B})` of the `N(θ, B/4·I)` component in
/// the proposal mixture; the rest goes to `N(θ₀, B/4·I)`.
pub fn mixture_weight<T: Real>(delta: &[T], t: T, b: T) -> T {
    let e = (-norm_sq(delta) / b).exp();
    let one_minus_t = T::one() - t;
    (T::one() + one_minus_t * one_minus_t * e).recip()
}

/// An accepted draw and the number of proposals it took.
#[derive(Debug, Clone, PartialEq)]
pub struct Draw<T> {
    pub x: Vec<T>,
    pub attempts: u64,
}

/// Rejection sampler for [`postselected_pdf`] with a two-component Gaussian
/// mixture proposal.
#[derive(Debug, Clone)]
pub struct PostselectedSampler<T> {
    theta: Vec<T>,
    theta0: Vec<T>,
    b: T,
    sd: T,
    p: T,
    envelope: T,
    // (1−t)·e^{−‖δ‖²/2B}, the amplitude of the subtracted reference state
    cross: T,
}

impl<T: Real> PostselectedSampler<T> {
    pub fn new(theta: &[T], theta0: &[T], t: T, b: T) -> Result<Self> {
        check_dim(theta.len(), theta0.len())?;
        check_transmission(t)?;
        if !(b > T::zero()) {
            return Err(Error::invalid("B", "must be positive"));
        }
        let delta = crate::scalar::sub(theta, theta0);
        let d2 = norm_sq(&delta);
        Ok(Self {
            theta: theta.to_vec(),
            theta0: theta0.to_vec(),
            b,
            sd: (b / T::lit(4.0)).sqrt(),
            p: mixture_weight(&delta, t, b),
            envelope: envelope_constant(&delta, t, b),
            cross: (T::one() - t) * (-d2 / (T::lit(2.0) * b)).exp(),
        })
    }

    pub fn envelope(&self) -> T {
        self.envelope
    }

    pub fn mixture_weight(&self) -> T {
        self.p
    }

    /// Mixture proposal density `g(x)`.
    pub fn proposal_pdf(&self, x: &[T]) -> T {
        let n = x.len();
        let c_n = (T::lit(2.0) / (T::lit(std::f64::consts::PI) * self.b)).powf(T::of_usize(n) / T::lit(2.0));
        let two = T::lit(2.0);
        c_n * (self.p * (-two * dist_sq(x, &self.theta) / self.b).exp()
            + (T::one() - self.p) * (-two * dist_sq(x, &self.theta0) / self.b).exp())
    }

    /// `f(x) / (M·g(x))`, evaluated without the common normalizations.
    ///
    /// With `a = e^{−‖x−θ‖²/B}` and `c = cross·e^{−‖x−θ₀‖²/B}` the ratio is
    /// `(a − c)² / (a² + c²)`, computed relative to the larger exponent so
    /// it stays finite far in the tails.
    pub fn acceptance_ratio(&self, x: &[T]) -> T {
        if self.cross == T::zero() {
            return T::one();
        }
        let la = -dist_sq(x, &self.theta) / self.b;
        let lc = -dist_sq(x, &self.theta0) / self.b + self.cross.ln();
        let m = la.max(lc);
        let a = (la - m).exp();
        let c = (lc - m).exp();
        (a - c) * (a - c) / (a * a + c * c)
    }

    /// One proposal; returns the candidate and whether it was accepted.
    pub fn propose<R: Rng + ?Sized>(&self, rng: &mut R, x: &mut [T]) -> bool {
        let from_theta = T::lit(rng.random::<f64>()) < self.p;
        let centre = if from_theta { &self.theta } else { &self.theta0 };
        for (xi, &c) in x.iter_mut().zip(centre) {
            *xi = c + self.sd * standard_normal::<T, _>(rng);
        }
        let u = T::lit(rng.random::<f64>());
        u < self.acceptance_ratio(x)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, max_attempts: u64) -> Result<Draw<T>> {
        let mut x = vec![T::zero(); self.theta.len()];
        for attempt in 1..=max_attempts {
            if self.propose(rng, &mut x) {
                return Ok(Draw { x, attempts: attempt });
            }
        }
        Err(Error::MaxAttemptsExceeded { attempts: max_attempts })
    }
}

/// Exact draw from [`postselected_pdf`] by rejection sampling.
pub fn sample_postselected<T: Real>(
    theta: &[T],
    theta0: &[T],
    t: T,
    b: T,
    rng: &mut SeededRng,
    max_attempts: u64,
) -> Result<Draw<T>> {
    if max_attempts == 0 {
        return Err(Error::invalid("max_attempts", "must be at least 1"));
    }
    PostselectedSampler::new(theta, theta0, t, b)?.sample(rng, max_attempts)
}
