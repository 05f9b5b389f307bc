//! Experiment configuration: built-in defaults, an optional JSON file and
//! command-line flags, merged in that order.

use std::fmt;
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use serde::{Deserialize, Serialize};
use stein_sense::postselect::{Baseline, SpreadMeasure};
use stein_sense::{SpdMatrix, Strategy};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{path}:{line}:{column}: {message}")]
    Syntax { path: String, line: usize, column: usize, message: String },
    #[error("invalid `{field}`: {reason}")]
    Field { field: &'static str, reason: String },
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

fn field(field: &'static str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Field { field, reason: reason.into() }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Experiment {
    Fig1,
    Fig2a,
    Fig2b,
    Risk,
    Bayes,
    Selfcheck,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Fig1 => "fig1",
            Experiment::Fig2a => "fig2a",
            Experiment::Fig2b => "fig2b",
            Experiment::Risk => "risk",
            Experiment::Bayes => "bayes",
            Experiment::Selfcheck => "selfcheck",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum StrategyArg {
    SeparateNoiseless,
    SequentialNoiseless,
    SeparateNoisy,
    SequentialNoisy,
}

impl fmt::Display for StrategyArg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let v = self.to_possible_value().expect("no skipped variants");
        f.write_str(v.get_name())
    }
}

impl From<StrategyArg> for Strategy {
    fn from(s: StrategyArg) -> Self {
        match s {
            StrategyArg::SeparateNoiseless => Strategy::SeparateNoiseless,
            StrategyArg::SequentialNoiseless => Strategy::SequentialNoiseless,
            StrategyArg::SeparateNoisy => Strategy::SeparateNoisy,
            StrategyArg::SequentialNoisy => Strategy::SequentialNoisy,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum BaselineArg {
    RiskEngine,
    ForcedStrategy,
}

impl From<BaselineArg> for Baseline {
    fn from(b: BaselineArg) -> Self {
        match b {
            BaselineArg::RiskEngine => Baseline::RiskEngine,
            BaselineArg::ForcedStrategy => Baseline::ForcedStrategy,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum SpreadArg {
    Total,
    Pooled,
}

impl From<SpreadArg> for SpreadMeasure {
    fn from(s: SpreadArg) -> Self {
        match s {
            SpreadArg::Total => SpreadMeasure::Total,
            SpreadArg::Pooled => SpreadMeasure::PooledPerComponent,
        }
    }
}

/// Covariance given either as text or as explicit rows.
///
/// Text forms: `c*I(n)`, `I(n)`, `c*I` and `I` (dimension taken from
/// `theta`), `diag(a,b,…)`, and dense rows `a,b;c,d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SpdSpec {
    Text(String),
    Rows(Vec<Vec<f64>>),
}

impl SpdSpec {
    pub fn resolve(&self, name: &'static str, dim: usize) -> Result<SpdMatrix<f64>, ConfigError> {
        let m = match self {
            SpdSpec::Rows(rows) => SpdMatrix::from_rows(rows).map_err(|e| field(name, e.to_string()))?,
            SpdSpec::Text(text) => parse_spd_text(text, dim).map_err(|reason| field(name, reason))?,
        };
        if m.dim() != dim {
            return Err(field(name, format!("has dimension {} but theta has {}", m.dim(), dim)));
        }
        Ok(m)
    }
}

impl fmt::Display for SpdSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SpdSpec::Text(t) => f.write_str(t),
            SpdSpec::Rows(rows) => {
                let body: Vec<String> =
                    rows.iter().map(|r| r.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")).collect();
                f.write_str(&body.join(";"))
            }
        }
    }
}

fn parse_real(s: &str) -> Result<f64, String> {
    let v: f64 = s.trim().parse().map_err(|_| format!("`{}` is not a number", s.trim()))?;
    if !v.is_finite() {
        return Err(format!("`{}` is not finite", s.trim()));
    }
    Ok(v)
}

pub fn parse_list(s: &str) -> Result<Vec<f64>, String> {
    s.split(',').filter(|p| !p.trim().is_empty()).map(parse_real).collect()
}

fn parse_spd_text(text: &str, dim: usize) -> Result<SpdMatrix<f64>, String> {
    let compact: String = text.chars().filter(|c| !c.is_whitespace()).collect();
    let (scale, rest) = match compact.split_once('*') {
        Some((c, r)) if r.starts_with('I') || r.starts_with("diag(") => (parse_real(c)?, r),
        _ => (1.0, compact.as_str()),
    };
    if let Some(inner) = rest.strip_prefix("diag(").and_then(|r| r.strip_suffix(')')) {
        let d: Vec<f64> = parse_list(inner)?.into_iter().map(|x| scale * x).collect();
        return SpdMatrix::diagonal(&d).map_err(|e| e.to_string());
    }
    if let Some(after) = rest.strip_prefix('I') {
        let n = if after.is_empty() {
            dim
        } else {
            let inner = after.strip_prefix('(').and_then(|r| r.strip_suffix(')')).ok_or("expected `I(n)`")?;
            inner.parse::<usize>().map_err(|_| format!("`{inner}` is not a dimension"))?
        };
        if !(scale > 0.0) {
            return Err("identity scale must be positive".into());
        }
        return Ok(SpdMatrix::scaled_identity(n, scale));
    }
    let rows: Vec<Vec<f64>> = compact.split(';').map(parse_list).collect::<Result<_, _>>()?;
    SpdMatrix::from_rows(&rows).map_err(|e| e.to_string())
}

/// Grid of resource counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "spacing", rename_all = "lowercase")]
pub enum NRange {
    Linear { start: u64, stop: u64, step: u64 },
    Log { start: u64, stop: u64, points: u64 },
}

impl NRange {
    fn bounds(self) -> (u64, u64) {
        match self {
            NRange::Linear { start, stop, .. } | NRange::Log { start, stop, .. } => (start, stop),
        }
    }

    fn validate(self) -> Result<(), ConfigError> {
        let (start, stop) = self.bounds();
        if start == 0 || stop < start {
            return Err(field("n", format!("need 1 ≤ start ≤ stop, got {start}..{stop}")));
        }
        match self {
            NRange::Linear { step: 0, .. } => Err(field("n", "step must be at least 1")),
            NRange::Log { points: 0, .. } => Err(field("n", "points must be at least 1")),
            _ => Ok(()),
        }
    }

    /// Ascending, deduplicated grid. Log grids round to the nearest integer.
    pub fn values(self) -> Vec<u64> {
        let mut v: Vec<u64> = match self {
            NRange::Linear { start, stop, step } => (start..=stop).step_by(step as usize).collect(),
            NRange::Log { start, stop, points } => {
                if points == 1 {
                    vec![start]
                } else {
                    let ratio = (stop as f64 / start as f64).ln();
                    (0..points)
                        .map(|i| (start as f64 * (ratio * i as f64 / (points - 1) as f64).exp()).round() as u64)
                        .collect()
                }
            }
        };
        v.dedup();
        v
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub theta: Vec<f64>,
    pub sigma: Option<SpdSpec>,
    pub delta: Option<SpdSpec>,
    pub xi: Option<SpdSpec>,
    #[serde(rename = "B")]
    pub b: f64,
    pub strategy: StrategyArg,
    pub n: NRange,
    /// Monte-Carlo samples per risk value.
    pub reps: u64,
    /// Strategy runs per postselected risk curve.
    pub runs: u64,
    pub baseline: BaselineArg,
    pub spread: SpreadArg,
    pub seed: u64,
    pub out_dir: PathBuf,
}

const FIG1_THETA: [f64; 4] = [0.5, -0.2, 0.3, 0.1];
const FIG2_THETA: [f64; 4] = [1.0 / 30.0, -2.0 / 30.0, 3.0 / 30.0, 1.5 / 30.0];
const MIN_REPS: u64 = 100;

impl ExperimentConfig {
    pub fn defaults(experiment: Experiment) -> Self {
        let log = |points| NRange::Log { start: 8, stop: 512, points };
        let fig2 = matches!(experiment, Experiment::Fig2a | Experiment::Fig2b);
        let text = |s: &str| Some(SpdSpec::Text(s.into()));
        Self {
            experiment,
            theta: if fig2 { FIG2_THETA.to_vec() } else { FIG1_THETA.to_vec() },
            sigma: if fig2 || experiment == Experiment::Selfcheck { None } else { text("4*I") },
            delta: if experiment == Experiment::Fig1 { text("4*I") } else { None },
            xi: if experiment == Experiment::Bayes { text("I") } else { None },
            b: 1.0,
            strategy: StrategyArg::SeparateNoiseless,
            n: match experiment {
                Experiment::Fig2a | Experiment::Fig2b => NRange::Linear { start: 5, stop: 200, step: 5 },
                Experiment::Bayes => log(7),
                _ => log(13),
            },
            reps: match experiment {
                Experiment::Fig1 | Experiment::Fig2a | Experiment::Fig2b => 1_000_000,
                _ => 100_000,
            },
            runs: 2000,
            baseline: BaselineArg::RiskEngine,
            spread: SpreadArg::Total,
            seed: 0,
            out_dir: PathBuf::from("out"),
        }
    }

    pub fn n_values(&self) -> Vec<u64> {
        self.n.values()
    }

    pub fn sigma_matrix(&self) -> Result<SpdMatrix<f64>, ConfigError> {
        self.sigma.as_ref().ok_or_else(|| field("sigma", "required"))?.resolve("sigma", self.theta.len())
    }

    pub fn delta_matrix(&self) -> Result<Option<SpdMatrix<f64>>, ConfigError> {
        self.delta.as_ref().map(|d| d.resolve("delta", self.theta.len())).transpose()
    }

    pub fn xi_matrix(&self) -> Result<SpdMatrix<f64>, ConfigError> {
        self.xi.as_ref().ok_or_else(|| field("xi", "required for the bayes experiment"))?.resolve("xi", self.theta.len())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let n = self.theta.len();
        if self.theta.iter().any(|x| !x.is_finite()) {
            return Err(field("theta", "entries must be finite"));
        }
        if !(self.b > 0.0 && self.b.is_finite()) {
            return Err(field("B", "must be positive and finite"));
        }
        if self.reps < MIN_REPS {
            return Err(field("reps", format!("must be at least {MIN_REPS}, got {}", self.reps)));
        }
        if self.runs < MIN_REPS {
            return Err(field("runs", format!("must be at least {MIN_REPS}, got {}", self.runs)));
        }
        self.n.validate()?;
        let noisy = Strategy::from(self.strategy).is_noisy();
        match self.experiment {
            Experiment::Fig1 => {
                require_dim(n, 3)?;
                self.sigma_matrix()?;
                if self.delta_matrix()?.is_none() {
                    return Err(field("delta", "fig1 compares noisy strategies and needs a noise covariance"));
                }
            }
            Experiment::Risk | Experiment::Bayes => {
                require_dim(n, 3)?;
                self.sigma_matrix()?;
                match (noisy, self.delta_matrix()?) {
                    (true, None) => {
                        return Err(field("delta", format!("strategy {} is noisy and needs a noise covariance", self.strategy)))
                    }
                    (false, Some(_)) => {
                        return Err(field("delta", format!("strategy {} is noiseless; drop delta", self.strategy)))
                    }
                    _ => {}
                }
                if self.experiment == Experiment::Bayes {
                    self.xi_matrix()?;
                }
            }
            Experiment::Fig2a | Experiment::Fig2b => require_dim(n, 4)?,
            Experiment::Selfcheck => {}
        }
        Ok(())
    }
}

fn require_dim(n: usize, min: usize) -> Result<(), ConfigError> {
    if n < min {
        return Err(field("theta", format!("needs at least {min} components, got {n}")));
    }
    Ok(())
}

/// On-disk form. Every key is optional; a run manifest is also accepted,
/// in which case its embedded `config` is used.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub experiment: Option<Experiment>,
    pub theta: Option<Vec<f64>>,
    pub sigma: Option<SpdSpec>,
    pub delta: Option<SpdSpec>,
    pub xi: Option<SpdSpec>,
    #[serde(rename = "B")]
    pub b: Option<f64>,
    pub strategy: Option<StrategyArg>,
    pub n: Option<NRange>,
    pub reps: Option<u64>,
    pub runs: Option<u64>,
    pub baseline: Option<BaselineArg>,
    pub spread: Option<SpreadArg>,
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
    // manifest keys
    pub config: Option<Box<ConfigFile>>,
    pub version: Option<String>,
    pub started_at: Option<String>,
    pub duration_s: Option<f64>,
    pub outputs: Option<Vec<PathBuf>>,
}

impl ConfigFile {
    pub fn parse(text: &str, path: &str) -> Result<Self, ConfigError> {
        let file: ConfigFile = serde_json::from_str(text).map_err(|e| ConfigError::Syntax {
            path: path.to_string(),
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        Ok(match file.config {
            Some(inner) => *inner,
            None => file,
        })
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let shown = path.display().to_string();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: shown.clone(), source })?;
        Self::parse(&text, &shown)
    }
}

/// Command-line overrides; `None` leaves the lower layer untouched.
#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub theta: Option<Vec<f64>>,
    pub sigma: Option<String>,
    pub delta: Option<String>,
    pub xi: Option<String>,
    pub b: Option<f64>,
    pub strategy: Option<StrategyArg>,
    pub n_min: Option<u64>,
    pub n_max: Option<u64>,
    pub n_points: Option<u64>,
    pub n_step: Option<u64>,
    pub reps: Option<u64>,
    pub runs: Option<u64>,
    pub baseline: Option<BaselineArg>,
    pub spread: Option<SpreadArg>,
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
}

/// Resolves defaults, then the file, then flags, and validates the result.
pub fn resolve(
    experiment: Option<Experiment>,
    file: Option<ConfigFile>,
    flags: &Overrides,
) -> Result<ExperimentConfig, ConfigError> {
    let file = file.unwrap_or_default();
    let experiment = match (experiment, file.experiment) {
        (Some(a), Some(b)) if a != b => {
            return Err(field("experiment", format!("command line says {a} but the config file says {b}")))
        }
        (Some(e), _) | (None, Some(e)) => e,
        (None, None) => return Err(field("experiment", "not given on the command line or in the config file")),
    };
    let mut c = ExperimentConfig::defaults(experiment);

    macro_rules! layer {
        ($($f:ident),*) => {
            $(if let Some(v) = file.$f.clone() { c.$f = v.into(); })*
        };
    }
    layer!(theta, b, strategy, n, reps, runs, baseline, spread, seed, out_dir);
    if file.sigma.is_some() {
        c.sigma = file.sigma.clone();
    }
    if file.delta.is_some() {
        c.delta = file.delta.clone();
    }
    if file.xi.is_some() {
        c.xi = file.xi.clone();
    }

    if let Some(t) = &flags.theta {
        c.theta = t.clone();
    }
    for (dst, src) in [(&mut c.sigma, &flags.sigma), (&mut c.delta, &flags.delta), (&mut c.xi, &flags.xi)] {
        if let Some(s) = src {
            *dst = Some(SpdSpec::Text(s.clone()));
        }
    }
    macro_rules! flag {
        ($($f:ident),*) => {
            $(if let Some(v) = flags.$f.clone() { c.$f = v; })*
        };
    }
    flag!(b, strategy, reps, runs, baseline, spread, seed, out_dir);
    c.n = merge_range(c.n, flags)?;
    c.validate()?;
    Ok(c)
}

fn merge_range(base: NRange, flags: &Overrides) -> Result<NRange, ConfigError> {
    let (start, stop) = base.bounds();
    let start = flags.n_min.unwrap_or(start);
    let stop = flags.n_max.unwrap_or(stop);
    Ok(match (flags.n_step, flags.n_points, base) {
        (Some(_), Some(_), _) => return Err(field("n", "give either --n-step or --n-points, not both")),
        (Some(step), None, _) | (None, None, NRange::Linear { step, .. }) => NRange::Linear { start, stop, step },
        (None, Some(points), _) | (None, None, NRange::Log { points, .. }) => NRange::Log { start, stop, points },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_shorthands() {
        let a = SpdSpec::Text("4*I(4)".into()).resolve("sigma", 4).unwrap();
        assert_eq!(a, SpdMatrix::scaled_identity(4, 4.0));
        let b = SpdSpec::Text("4 * I".into()).resolve("sigma", 3).unwrap();
        assert_eq!(b, SpdMatrix::scaled_identity(3, 4.0));
        assert_eq!(SpdSpec::Text("I".into()).resolve("xi", 2).unwrap(), SpdMatrix::identity(2));
        let d = SpdSpec::Text("2*diag(1,2)".into()).resolve("xi", 2).unwrap();
        assert_eq!(d, SpdMatrix::diagonal(&[2.0, 4.0]).unwrap());
    }

    #[test]
    fn dense_rows() {
        let m = SpdSpec::Text("2,0.5; 0.5,1".into()).resolve("sigma", 2).unwrap();
        assert_eq!(m.get(0, 1), 0.5);
        assert!(SpdSpec::Text("1,2;2,1".into()).resolve("sigma", 2).is_err());
        assert!(SpdSpec::Text("1,0;0".into()).resolve("sigma", 2).is_err());
        let err = SpdSpec::Text("I(3)".into()).resolve("sigma", 4).unwrap_err();
        assert!(err.to_string().contains("sigma"));
    }

    #[test]
    fn grids() {
        let log = NRange::Log { start: 8, stop: 512, points: 13 }.values();
        assert_eq!(log.first(), Some(&8));
        assert_eq!(log.last(), Some(&512));
        assert_eq!(log.len(), 13);
        assert!(log.windows(2).all(|w| w[0] < w[1]));
        let lin = NRange::Linear { start: 5, stop: 200, step: 5 }.values();
        assert_eq!(lin.len(), 40);
        assert_eq!(NRange::Log { start: 3, stop: 3, points: 1 }.values(), vec![3]);
    }

    #[test]
    fn flags_beat_file_beat_defaults() {
        let file = ConfigFile::parse(r#"{"reps": 500, "seed": 3, "theta": [1, 2, 3]}"#, "c.json").unwrap();
        let flags = Overrides { seed: Some(9), ..Default::default() };
        let c = resolve(Some(Experiment::Risk), Some(file), &flags).unwrap();
        assert_eq!((c.reps, c.seed, c.theta.len()), (500, 9, 3));
        assert_eq!(c.sigma_matrix().unwrap(), SpdMatrix::scaled_identity(3, 4.0));
    }

    #[test]
    fn fig1_from_flags() {
        let flags = Overrides {
            theta: Some(vec![0.5, -0.2, 0.3, 0.1]),
            sigma: Some("4*I(4)".into()),
            delta: Some("4*I(4)".into()),
            ..Default::default()
        };
        let c = resolve(Some(Experiment::Fig1), None, &flags).unwrap();
        assert_eq!(c, ExperimentConfig::defaults(Experiment::Fig1).with_spd_text("4*I(4)"));
    }

    impl ExperimentConfig {
        fn with_spd_text(mut self, s: &str) -> Self {
            self.sigma = Some(SpdSpec::Text(s.into()));
            self.delta = Some(SpdSpec::Text(s.into()));
            self
        }
    }

    #[test]
    fn missing_noise_names_the_field() {
        let flags = Overrides { strategy: Some(StrategyArg::SequentialNoisy), ..Default::default() };
        let err = resolve(Some(Experiment::Risk), None, &flags).unwrap_err();
        assert!(matches!(err, ConfigError::Field { field: "delta", .. }), "{err}");
        let c = ExperimentConfig { delta: None, ..ExperimentConfig::defaults(Experiment::Fig1) };
        assert!(matches!(c.validate(), Err(ConfigError::Field { field: "delta", .. })));
    }

    #[test]
    fn syntax_errors_carry_position() {
        let err = ConfigFile::parse("{\n  \"reps\": 10,\n  \"seed\": oops\n}", "bad.json").unwrap_err();
        match err {
            ConfigError::Syntax { line, path, .. } => {
                assert_eq!(line, 3);
                assert_eq!(path, "bad.json");
            }
            other => panic!("{other}"),
        }
        assert!(ConfigFile::parse(r#"{"repz": 10}"#, "x").is_err());
    }

    #[test]
    fn manifest_is_accepted() {
        let text = r#"{"config": {"experiment": "fig1", "reps": 1000}, "seed": 0, "version": "v",
            "started_at": "t", "duration_s": 1.0, "outputs": ["out/fig1.csv"]}"#;
        let file = ConfigFile::parse(text, "manifest.json").unwrap();
        let c = resolve(None, Some(file), &Overrides::default()).unwrap();
        assert_eq!((c.experiment, c.reps), (Experiment::Fig1, 1000));
    }

    #[test]
    fn bounds_checked() {
        let low = Overrides { reps: Some(10), ..Default::default() };
        assert!(matches!(resolve(Some(Experiment::Risk), None, &low), Err(ConfigError::Field { field: "reps", .. })));
        let empty = Overrides { n_min: Some(10), n_max: Some(5), ..Default::default() };
        assert!(resolve(Some(Experiment::Risk), None, &empty).is_err());
        let small = Overrides { theta: Some(vec![0.0; 3]), ..Default::default() };
        assert!(resolve(Some(Experiment::Fig2a), None, &small).is_err());
    }
}
