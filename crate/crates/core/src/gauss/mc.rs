use rayon::prelude::*;

use super::SeededRng;
use crate::scalar::Real;

/// Repetitions per deterministic work unit.
pub const CHUNK_REPS: u64 = 4096;

/// First two sample moments of a Monte-Carlo quantity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments<T> {
    pub count: u64,
    pub sum: T,
    pub sum_sq: T,
}

impl<T: Real> Moments<T> {
    pub fn empty() -> Self {
        Self { count: 0, sum: T::zero(), sum_sq: T::zero() }
    }

    pub fn push(&mut self, x: T) {
        self.count += 1;
        self.sum += x;
        self.sum_sq += x * x;
    }

    pub fn merge(mut self, other: &Self) -> Self {
        self.count += other.count;
        self.sum += other.sum;
        self.sum_sq += other.sum_sq;
        self
    }

    pub fn mean(&self) -> T {
        self.sum / T::lit(self.count as f64)
    }

    /// Unbiased sample variance; zero with fewer than two samples.
    pub fn variance(&self) -> T {
        if self.count < 2 {
            return T::zero();
        }
        let n = T::lit(self.count as f64);
        let centered = self.sum_sq - self.sum * self.sum / n;
        (centered / (n - T::one())).max(T::zero())
    }

    pub fn std_error(&self) -> T {
        (self.variance() / T::lit(self.count as f64)).sqrt()
    }
}

/// Runs `f` once per repetition, repetition `i` consuming `rng_fork(parent, i)`.
///
/// Repetitions are grouped into fixed chunks that are summed sequentially
/// and then combined in chunk order, so the result is bit-identical
/// regardless of how many worker threads rayon uses.
pub fn mc_moments<T, F>(reps: u64, parent: &SeededRng, f: F) -> Moments<T>
where
    T: Real,
    F: Fn(&mut SeededRng) -> T + Sync,
{
    mc_moments_with(reps, parent, || (), |_, rng| f(rng))
}

/// [`mc_moments`] with per-chunk scratch state built by `init`.
pub fn mc_moments_with<T, S, I, F>(reps: u64, parent: &SeededRng, init: I, f: F) -> Moments<T>
where
    T: Real,
    I: Fn() -> S + Sync,
    F: Fn(&mut S, &mut SeededRng) -> T + Sync,
{
    let chunks = reps.div_ceil(CHUNK_REPS);
    let partials: Vec<Moments<T>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut scratch = init();
            let mut m = Moments::empty();
            let end = ((c + 1) * CHUNK_REPS).min(reps);
            for i in c * CHUNK_REPS..end {
                let mut rng = parent.fork(i);
                m.push(f(&mut scratch, &mut rng));
            }
            m
        })
        .collect();
    partials.iter().fold(Moments::empty(), |acc, m| acc.merge(m))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gauss::standard_normal;

    #[test]
    fn moments_of_known_sequence() {
        let mut m = Moments::<f64>::empty();
        for x in [1.0, 2.0, 3.0, 4.0] {
            m.push(x);
        }
        assert_eq!(m.mean(), 2.5);
        assert!((m.variance() - 5.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn thread_count_does_not_change_result() {
        let parent = SeededRng::new(99);
        let f = |r: &mut SeededRng| standard_normal::<f64, _>(r);
        let a = mc_moments(20_000, &parent, f);
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let b = pool.install(|| mc_moments(20_000, &parent, f));
        assert_eq!(a, b);
        assert!(a.mean().abs() < 4.0 * a.std_error());
    }
}
