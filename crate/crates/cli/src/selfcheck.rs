//! Numerical self-checks of the module invariants, shared by the
//! `selfcheck` subcommand and the acceptance suite.

use rand::Rng;
use stein_sense::gauss::standard_normal;
use stein_sense::postselect::{envelope_constant, postselected_pdf, sample_postselected, PostselectedSampler};
use stein_sense::risk::{agree, bayes_risk_mc, bayes_risk_table, strictly_less, Resolution};
use stein_sense::sensing::lemma1_check;
use stein_sense::{EstimatorKind, GaussianPrior, SeededRng, SpdMatrix};

use crate::output::{Cell, Table};

/// Outcome of one check family.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub instances: usize,
    pub failures: usize,
    /// Largest value of the check's own statistic (discrepancy, z-score,
    /// distance, …).
    pub worst: f64,
    pub detail: String,
}

impl Check {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

/// `G·Gᵀ/n + floor·I` with Gaussian `G`, rescaled by a log-uniform factor
/// in `[1/4, 4]`.
pub fn random_spd(dim: usize, floor: f64, rng: &mut SeededRng) -> SpdMatrix<f64> {
    let g: Vec<f64> = (0..dim * dim).map(|_| standard_normal::<f64, _>(rng)).collect();
    let scale = (rng.random_range(-1.0..1.0f64) * 4f64.ln()).exp();
    let mut a = vec![0.0; dim * dim];
    for i in 0..dim {
        for j in 0..dim {
            let s: f64 = (0..dim).map(|k| g[i * dim + k] * g[j * dim + k]).sum();
            a[i * dim + j] = scale * s / dim as f64;
        }
        a[i * dim + i] += scale * floor;
    }
    SpdMatrix::from_row_major(dim, a).expect("Gram matrix plus a ridge is SPD")
}

/// Uniform point in the ball of the given radius.
pub fn random_in_ball(dim: usize, radius: f64, rng: &mut SeededRng) -> Vec<f64> {
    let dir: Vec<f64> = (0..dim).map(|_| standard_normal::<f64, _>(rng)).collect();
    let norm = dir.iter().map(|x| x * x).sum::<f64>().sqrt();
    let r = radius * rng.random::<f64>().powf(1.0 / dim as f64);
    dir.iter().map(|x| r * x / norm).collect()
}

pub fn lemma1_sweep(pairs: usize, tol: f64, rng: &SeededRng) -> Check {
    let mut worst = 0.0f64;
    let mut failures = 0;
    for i in 0..pairs {
        let mut r = rng.fork(i as u64);
        let dim = 2 + i % 7;
        let a = random_spd(dim, 0.5, &mut r);
        let b = random_spd(dim, 0.5, &mut r);
        let d = lemma1_check(&a, &b).unwrap_or(f64::INFINITY);
        worst = worst.max(d);
        failures += usize::from(!(d <= tol));
    }
    Check { name: "lemma1", instances: pairs, failures, worst, detail: format!("max discrepancy {worst:.3e} (tol {tol:.0e})") }
}

/// Filter settings `(θ, θ₀, t, B)` for the sampler checks; the first is the
/// centred filter at `t = 0.5`, whose acceptance rate is exactly 1/5.
pub fn sampler_configs() -> Vec<(Vec<f64>, Vec<f64>, f64, f64)> {
    vec![
        (vec![0.0; 4], vec![0.0; 4], 0.5, 1.0),
        (vec![0.2, -0.1, 0.3, 0.05], vec![0.0; 4], 0.3, 1.0),
        (vec![1.0, 0.5, -0.5, 0.2], vec![0.8, 0.6, -0.4, 0.1], 0.15, 2.0),
        (vec![0.05, -0.02, 0.01, 0.0], vec![0.0; 4], 0.08, 0.5),
        (vec![1.5, -1.0, 0.0, 1.0], vec![0.0; 4], 0.6, 1.5),
    ]
}

pub fn acceptance_rates(attempts: u64, rng: &SeededRng) -> Check {
    let configs = sampler_configs();
    let mut worst = 0.0f64;
    let mut failures = 0;
    let mut rates = Vec::new();
    for (i, (theta, theta0, t, b)) in configs.iter().enumerate() {
        let sampler = PostselectedSampler::new(theta, theta0, *t, *b).expect("valid filter");
        let mut r = rng.fork(i as u64);
        let mut x = vec![0.0; theta.len()];
        let accepted = (0..attempts).filter(|_| sampler.propose(&mut r, &mut x)).count() as f64;
        let delta: Vec<f64> = theta.iter().zip(theta0).map(|(a, c)| a - c).collect();
        let p = 1.0 / envelope_constant(&delta, *t, *b);
        let rate = accepted / attempts as f64;
        let z = (rate - p).abs() / (p * (1.0 - p) / attempts as f64).sqrt().max(f64::MIN_POSITIVE);
        worst = worst.max(z);
        failures += usize::from(z >= 4.0);
        rates.push(format!("{rate:.4}/{p:.4}"));
    }
    Check {
        name: "acceptance_rate",
        instances: configs.len(),
        failures,
        worst,
        detail: format!("empirical/expected {} (max |z| {worst:.2})", rates.join(" ")),
    }
}

/// CDF of coordinate 0 of the postselected law, by tensor-grid trapezoid
/// quadrature of the density over the remaining coordinates.
pub struct QuadratureMarginal {
    xs: Vec<f64>,
    cdf: Vec<f64>,
}

impl QuadratureMarginal {
    pub fn new(theta: &[f64], theta0: &[f64], t: f64, b: f64, x_points: usize, inner_points: usize) -> Self {
        let n = theta.len();
        let sd = (b / 4.0).sqrt();
        let span = |j: usize, k: f64| (theta[j].min(theta0[j]) - k * sd, theta[j].max(theta0[j]) + k * sd);
        let grid = |(lo, hi): (f64, f64), m: usize| -> (Vec<f64>, f64) {
            let h = (hi - lo) / (m - 1) as f64;
            ((0..m).map(|i| lo + h * i as f64).collect(), h)
        };
        let inner: Vec<(Vec<f64>, f64)> = (1..n).map(|j| grid(span(j, 9.0), inner_points)).collect();
        let (xs, hx) = grid(span(0, 10.0), x_points);

        let total_inner: usize = inner.iter().map(|(g, _)| g.len()).product();
        let mut point = vec![0.0; n];
        let density: Vec<f64> = xs
            .iter()
            .map(|&x0| {
                point[0] = x0;
                let mut acc = 0.0;
                for flat in 0..total_inner {
                    let mut rem = flat;
                    let mut w = 1.0;
                    for (j, (g, h)) in inner.iter().enumerate() {
                        let idx = rem % g.len();
                        rem /= g.len();
                        point[j + 1] = g[idx];
                        let edge = idx == 0 || idx + 1 == g.len();
                        w *= if edge { 0.5 * h } else { *h };
                    }
                    acc += w * postselected_pdf(&point, theta, theta0, t, b);
                }
                acc
            })
            .collect();
        let mut cdf = vec![0.0; xs.len()];
        for i in 1..xs.len() {
            cdf[i] = cdf[i - 1] + 0.5 * hx * (density[i - 1] + density[i]);
        }
        Self { xs, cdf }
    }

    pub fn total(&self) -> f64 {
        *self.cdf.last().unwrap_or(&0.0)
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let h = self.xs[1] - self.xs[0];
        let f = (x - self.xs[0]) / h;
        if f <= 0.0 {
            return 0.0;
        }
        let i = f as usize;
        if i + 1 >= self.xs.len() {
            return self.total();
        }
        let w = f - i as f64;
        self.cdf[i] * (1.0 - w) + self.cdf[i + 1] * w
    }
}

/// Kolmogorov sup-distance between sorted draws and a CDF.
pub fn ecdf_distance(sorted: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(k, &x)| {
            let f = cdf(x);
            (f - k as f64 / n).abs().max((f - (k + 1) as f64 / n).abs())
        })
        .fold(0.0, f64::max)
}

pub fn sampler_ecdf(draws: usize, rng: &SeededRng) -> Check {
    let bound = 3.0 * 1.36 / (draws as f64).sqrt();
    let configs = sampler_configs();
    let mut worst = 0.0f64;
    let mut failures = 0;
    let mut dists = Vec::new();
    for (i, (theta, theta0, t, b)) in configs.iter().enumerate() {
        let marginal = QuadratureMarginal::new(theta, theta0, *t, *b, 801, 36);
        let mut r = rng.fork(i as u64);
        let mut xs: Vec<f64> = (0..draws)
            .map(|_| sample_postselected(theta, theta0, *t, *b, &mut r, 1_000_000).map(|d| d.x[0]).unwrap_or(f64::NAN))
            .collect();
        xs.sort_by(f64::total_cmp);
        let d = ecdf_distance(&xs, |x| marginal.cdf(x));
        let mass_err = (marginal.total() - 1.0).abs();
        worst = worst.max(d);
        failures += usize::from(!(d < bound) || mass_err > 1e-6);
        dists.push(format!("{d:.4}"));
    }
    Check {
        name: "sampler_ecdf",
        instances: configs.len(),
        failures,
        worst,
        detail: format!("sup distances {} (bound {bound:.4})", dists.join(" ")),
    }
}

/// Per-instance result of the Bayes sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BayesInstance {
    /// Every table row agrees with joint sampling within 4 combined SE.
    pub table_matches: bool,
    pub bayes_below_js: Resolution,
    pub js_below_mle: Resolution,
}

impl BayesInstance {
    pub fn resolved(&self) -> bool {
        self.bayes_below_js == Resolution::Holds && self.js_below_mle == Resolution::Holds
    }

    pub fn violated(&self) -> bool {
        self.bayes_below_js == Resolution::Violated || self.js_below_mle == Resolution::Violated
    }
}

pub fn bayes_instances(count: usize, reps: u64, rng: &SeededRng) -> Vec<BayesInstance> {
    (0..count)
        .map(|i| {
            let mut r = rng.fork(i as u64);
            let dim = 3 + i % 4;
            let gamma = random_spd(dim, 0.3, &mut r);
            let xi = random_spd(dim, 0.3, &mut r);
            let theta0 = random_in_ball(dim, 2.0, &mut r);
            let prior = GaussianPrior::new(theta0, xi).expect("dimensions agree");
            let kinds = [EstimatorKind::Mle, EstimatorKind::js_origin(dim), EstimatorKind::Bayes(prior.clone())];
            let mut table = Vec::new();
            let mut table_matches = true;
            for (k, kind) in kinds.iter().enumerate() {
                let tab = bayes_risk_table(kind, &gamma, &prior, reps, &r.fork(k as u64)).expect("valid instance");
                let mc = bayes_risk_mc(kind, &prior, &gamma, reps, &r.fork(10 + k as u64)).expect("valid instance");
                table_matches &= agree(&tab, &mc, 4.0);
                table.push(tab);
            }
            BayesInstance {
                table_matches,
                bayes_below_js: strictly_less(&table[2], &table[1], 4.0),
                js_below_mle: strictly_less(&table[1], &table[0], 4.0),
            }
        })
        .collect()
}

pub fn bayes_ordering(count: usize, reps: u64, rng: &SeededRng) -> Check {
    let inst = bayes_instances(count, reps, rng);
    let mismatched = inst.iter().filter(|b| !b.table_matches).count();
    let violated = inst.iter().filter(|b| b.violated()).count();
    let resolved = inst.iter().filter(|b| b.resolved()).count();
    let need = (count * 9).div_ceil(10);
    let failures = mismatched + violated + usize::from(resolved < need);
    Check {
        name: "bayes_ordering",
        instances: count,
        failures,
        worst: (count - resolved) as f64,
        detail: format!("{resolved}/{count} resolved (need {need}), {violated} violated, {mismatched} table mismatches"),
    }
}

pub fn run_all(reps: u64, rng: &SeededRng) -> Vec<Check> {
    vec![
        lemma1_sweep(100, 1e-9, &rng.fork(0)),
        acceptance_rates(reps, &rng.fork(1)),
        sampler_ecdf(reps as usize, &rng.fork(2)),
        bayes_ordering(20, reps, &rng.fork(3)),
    ]
}

pub fn table(checks: &[Check]) -> Table {
    let header = ["check", "instances", "failures", "worst", "passed"].map(String::from).to_vec();
    let mut t = Table::new("selfcheck", header);
    for c in checks {
        t.push(vec![
            Cell::Text(c.name.into()),
            Cell::Int(c.instances as u64),
            Cell::Int(c.failures as u64),
            Cell::Real(c.worst),
            Cell::Int(u64::from(c.passed())),
        ]);
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_spd_is_reproducible_and_valid() {
        let a = random_spd(5, 0.1, &mut SeededRng::new(1));
        let b = random_spd(5, 0.1, &mut SeededRng::new(1));
        assert_eq!(a, b);
        assert_eq!(a.dim(), 5);
    }

    #[test]
    fn ball_points_stay_inside() {
        let mut rng = SeededRng::new(2);
        for _ in 0..1000 {
            let v = random_in_ball(4, 5.0, &mut rng);
            assert!(v.iter().map(|x| x * x).sum::<f64>() <= 25.0);
        }
    }

    #[test]
    fn open_filter_quadrature_is_gaussian() {
        // t = 1: the marginal is N(θ, B/4)
        let q = QuadratureMarginal::new(&[0.3, 0.0, 0.1], &[0.0; 3], 1.0, 1.0, 801, 30);
        assert!((q.total() - 1.0).abs() < 1e-8);
        assert!((q.cdf(0.3) - 0.5).abs() < 1e-5);
        // Φ(1) at one standard deviation; linear interpolation dominates the error
        let err = (q.cdf(0.8) - 0.841_344_746).abs();
        assert!(err < 1e-4, "{err}");
    }

    #[test]
    fn ecdf_distance_of_exact_quantiles_is_small() {
        let xs: Vec<f64> = (0..1000).map(|i| (i as f64 + 0.5) / 1000.0).collect();
        assert!((ecdf_distance(&xs, |x| x.clamp(0.0, 1.0)) - 0.0005).abs() < 1e-12);
    }
}
