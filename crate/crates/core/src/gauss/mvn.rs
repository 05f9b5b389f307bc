use rand::Rng;
use rand_distr::StandardNormal;

use super::{SeededRng, SpdMatrix};
use crate::error::{check_dim, Result};
use crate::scalar::Real;

#[inline]
pub fn standard_normal<T: Real, R: Rng + ?Sized>(rng: &mut R) -> T {
    let z: f64 = rng.sample(StandardNormal);
    T::lit(z)
}

/// One draw from `N(mean, cov)` as `mean + L·ξ` with `ξ` standard normal.
pub fn mvn_sample<T: Real>(mean: &[T], cov: &SpdMatrix<T>, rng: &mut SeededRng) -> Result<Vec<T>> {
    let mut out = vec![T::zero(); mean.len()];
    let mut scratch = vec![T::zero(); mean.len()];
    mvn_sample_into(mean, cov, rng, &mut scratch, &mut out)?;
    Ok(out)
}

/// Allocation-free variant of [`mvn_sample`] for Monte-Carlo loops.
pub fn mvn_sample_into<T: Real, R: Rng + ?Sized>(
    mean: &[T],
    cov: &SpdMatrix<T>,
    rng: &mut R,
    scratch: &mut [T],
    out: &mut [T],
) -> Result<()> {
    check_dim(cov.dim(), mean.len())?;
    check_dim(cov.dim(), out.len())?;
    check_dim(cov.dim(), scratch.len())?;
    for s in scratch.iter_mut() {
        *s = standard_normal(rng);
    }
    cov.factor_mul_vec(scratch, out);
    for (o, &m) in out.iter_mut().zip(mean) {
        *o += m;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;

    #[test]
    fn mean_converges() {
        let cov = SpdMatrix::<f64>::identity(4);
        let mut rng = SeededRng::new(11);
        let reps = 100_000;
        let mut acc = [0.0; 4];
        for _ in 0..reps {
            let x = mvn_sample(&[0.0; 4], &cov, &mut rng).unwrap();
            for (a, v) in acc.iter_mut().zip(&x) {
                *a += v;
            }
        }
        for a in acc {
            assert!((a / reps as f64).abs() < 0.02);
        }
    }

    #[test]
    fn vanishing_covariance_pins_mean() {
        let cov = SpdMatrix::scaled_identity(2, 1e-12);
        let mut rng = SeededRng::new(3);
        for _ in 0..1000 {
            let x = mvn_sample::<f64>(&[5.0, 5.0], &cov, &mut rng).unwrap();
            assert!(x.iter().all(|v| (v - 5.0).abs() < 1e-4));
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let cov = SpdMatrix::from_rows(&[vec![2.0, 0.3], vec![0.3, 1.0]]).unwrap();
        let run = || {
            let mut rng = SeededRng::with_stream(5, 9);
            (0..50).map(|_| mvn_sample(&[1.0, -1.0], &cov, &mut rng).unwrap()).collect::<Vec<_>>()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn dimension_mismatch() {
        let cov = SpdMatrix::<f64>::identity(3);
        let mut rng = SeededRng::new(0);
        assert!(matches!(mvn_sample(&[0.0; 2], &cov, &mut rng), Err(Error::DimensionMismatch { .. })));
    }
}
