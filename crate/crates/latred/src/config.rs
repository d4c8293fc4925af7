//! JSON configuration files. Command-line flags take precedence over
//! every field read from a file.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use latred_core::Reality;
use serde::Deserialize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
    Text,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum FieldKind {
    Real,
    Complex,
}

impl From<FieldKind> for Reality {
    fn from(f: FieldKind) -> Reality {
        match f {
            FieldKind::Real => Reality::RealField,
            FieldKind::Complex => Reality::ComplexField,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum KappaSpec {
    Single(f64),
    Sweep { start: f64, stop: f64, count: usize },
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ConfigError {
    #[error("κ = {0} is outside (0, π)")]
    KappaRange(f64),
    #[error("a κ sweep needs at least one point")]
    EmptySweep,
    #[error("cannot read κ sweep `{0}`: expected start:stop:count")]
    SweepSyntax(String),
    #[error("cannot read parameter `{0}`: expected name=value")]
    ParamSyntax(String),
}

impl KappaSpec {
    /// `a:b:n`.
    pub fn parse_sweep(s: &str) -> Result<Self, ConfigError> {
        let bad = || ConfigError::SweepSyntax(s.to_string());
        let parts: Vec<&str> = s.split(':').collect();
        let [a, b, n] = parts.as_slice() else { return Err(bad()) };
        Ok(KappaSpec::Sweep {
            start: a.trim().parse().map_err(|_| bad())?,
            stop: b.trim().parse().map_err(|_| bad())?,
            count: n.trim().parse().map_err(|_| bad())?,
        })
    }

    pub fn values(&self) -> Result<Vec<f64>, ConfigError> {
        let ks = match *self {
            KappaSpec::Single(k) => vec![k],
            KappaSpec::Sweep { count: 0, .. } => return Err(ConfigError::EmptySweep),
            KappaSpec::Sweep { start, stop, count } => crate::analysis::linspace(start, stop, count),
        };
        match ks.iter().find(|k| !(**k > 0.0 && **k < PI)) {
            Some(k) => Err(ConfigError::KappaRange(*k)),
            None => Ok(ks),
        }
    }
}

/// `name=value`.
pub fn parse_param(s: &str) -> Result<(String, f64), ConfigError> {
    let bad = || ConfigError::ParamSyntax(s.to_string());
    let (k, v) = s.split_once('=').ok_or_else(bad)?;
    let k = k.trim();
    if k.is_empty() {
        return Err(bad());
    }
    Ok((k.to_string(), v.trim().parse().map_err(|_| bad())?))
}

#[derive(Clone, Debug, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TolConfig {
    pub structural: Option<f64>,
    pub classify: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub path: Option<PathBuf>,
    pub format: Option<Format>,
}

/// Settings shared by `analyze` and `simulate`.
#[derive(Clone, Debug, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisConfig {
    /// Catalog id or equation text.
    pub equation: Option<String>,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
    pub kappa: Option<KappaSpec>,
    pub branch: Option<usize>,
    pub field: Option<FieldKind>,
    pub tolerances: Option<TolConfig>,
    pub output: Option<OutputConfig>,
    pub jobs: Option<usize>,
    pub eps: Option<f64>,
    pub sites: Option<usize>,
    pub slow_time: Option<f64>,
    pub threshold: Option<f64>,
}

impl AnalysisConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Splits `equation` into a catalog id or an equation source.
    pub fn model_source(&self) -> (Option<&str>, Option<&str>) {
        match self.equation.as_deref() {
            Some(e) if latred_core::catalog::lookup(e).is_some() => (Some(e), None),
            Some(e) => (None, Some(e)),
            None => (None, None),
        }
    }
}
