//! CSV tables and the run manifest.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;

use crate::config::ExperimentConfig;

/// A CSV cell: integers print as such, reals with 17 significant digits.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(u64),
    Real(f64),
    Text(String),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Int(i) => i.to_string(),
            Cell::Real(x) => format!("{x:.16e}"),
            Cell::Text(s) => s.clone(),
        }
    }

    pub fn as_f64(&self) -> f64 {
        match self {
            Cell::Int(i) => *i as f64,
            Cell::Real(x) => *x,
            Cell::Text(_) => f64::NAN,
        }
    }
}

/// Column-named table; value columns are followed by their `_se` partner
/// when built through [`Table::push_value`].
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(name: impl Into<String>, header: Vec<String>) -> Self {
        Self { name: name.into(), header, rows: Vec::new() }
    }

    /// Header `key, v1, v1_se, v2, v2_se, …`.
    pub fn with_se(name: impl Into<String>, key: &str, values: &[&str]) -> Self {
        let mut header = vec![key.to_string()];
        for v in values {
            header.push(v.to_string());
            header.push(format!("{v}_se"));
        }
        Self::new(name, header)
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.header.len(), "row width for {}", self.name);
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[i].as_f64()).collect())
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|c| c.render()).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        if let Some((r, c)) = self.first_non_finite() {
            anyhow::bail!("{}: non-finite value in row {r}, column `{}`", self.name, self.header[c]);
        }
        let path = dir.join(format!("{}.csv", self.name));
        fs::write(&path, self.to_csv()).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }

    fn first_non_finite(&self) -> Option<(usize, usize)> {
        self.rows.iter().enumerate().find_map(|(r, row)| {
            row.iter().position(|c| matches!(c, Cell::Real(x) if !x.is_finite())).map(|c| (r, c))
        })
    }
}

#[derive(Debug, Serialize)]
pub struct Manifest<'a> {
    pub config: &'a ExperimentConfig,
    pub seed: u64,
    pub version: String,
    pub started_at: String,
    pub duration_s: f64,
    pub outputs: Vec<PathBuf>,
}

impl Manifest<'_> {
    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join("manifest.json");
        let mut f = fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        serde_json::to_writer_pretty(&mut f, self)?;
        f.write_all(b"\n")?;
        Ok(path)
    }
}

/// Package version plus `git describe` of the working tree when available.
pub fn version_string() -> String {
    let pkg = env!("CARGO_PKG_VERSION");
    let describe = std::process::Command::new("git")
        .args(["describe", "--always", "--dirty", "--tags"])
        .current_dir(env!("CARGO_MANIFEST_DIR"))
        .output()
        .ok()
        .filter(|o| o.status.success())
        .and_then(|o| String::from_utf8(o.stdout).ok())
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty());
    match describe {
        Some(d) => format!("{pkg} ({d})"),
        None => pkg.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_significant_digits() {
        assert_eq!(Cell::Real(0.1).render(), "1.0000000000000001e-1");
        assert_eq!(Cell::Real(1.0 / 3.0).render().parse::<f64>().unwrap(), 1.0 / 3.0);
        assert_eq!(Cell::Int(42).render(), "42");
    }

    #[test]
    fn csv_layout() {
        let mut t = Table::with_se("x", "N", &["a", "b"]);
        assert_eq!(t.header, ["N", "a", "a_se", "b", "b_se"]);
        t.push(vec![Cell::Int(1), Cell::Real(1.0), Cell::Real(0.0), Cell::Real(2.0), Cell::Real(0.5)]);
        let csv = t.to_csv();
        assert_eq!(csv.lines().count(), 2);
        assert!(csv.starts_with("N,a,a_se,b,b_se\n1,1.0000000000000000e0,"));
        assert_eq!(t.column("b"), Some(vec![2.0]));
    }

    #[test]
    fn refuses_non_finite() {
        let mut t = Table::with_se("bad", "N", &["a"]);
        t.push(vec![Cell::Int(1), Cell::Real(f64::NAN), Cell::Real(0.0)]);
        let dir = tempfile::tempdir().unwrap();
        assert!(t.write(dir.path()).is_err());
    }
}
