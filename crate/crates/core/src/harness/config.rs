//! Simulation configuration and its flat `key = value` file format.
//!
//! ```text
//! # comments start with '#'
//! setup = setup2            # or: g = t:8,t:5
//! n = 4000
//! replications = 200
//! seed = 20240501
//! targets = setup1; setup2; setup3
//! preliminaries = fobi, fastica
//! competitors = fobi, fastica
//! c = 100
//! lambda_max = 20
//! l_true = 1, 0.2; -0.1, 1  # rows separated by ';'
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::mixing::MixingMatrix;
use crate::numerics::{Matrix, Vector};
use crate::par::Execution;
use crate::r_estimator::LineSearchOptions;
use crate::scores::ComponentDensities;

/// Desk-scale replication count.
pub const DESK_REPLICATIONS: usize = 200;
/// Replication count of the full-size study.
pub const PAPER_REPLICATIONS: usize = 2000;

/// The three bivariate data-generating models of the simulation study.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Setup {
    /// `(gaussian, t:5)`
    Setup1,
    /// `(logistic, t:5)`
    Setup2,
    /// `(t:8, t:5)`
    Setup3,
}

impl Setup {
    pub const ALL: [Setup; 3] = [Setup::Setup1, Setup::Setup2, Setup::Setup3];

    pub fn densities(self) -> ComponentDensities {
        let spec = match self {
            Setup::Setup1 => "gaussian,t:5",
            Setup::Setup2 => "logistic,t:5",
            Setup::Setup3 => "t:8,t:5",
        };
        spec.parse().expect("built-in setup")
    }

    pub fn name(self) -> &'static str {
        match self {
            Setup::Setup1 => "setup1",
            Setup::Setup2 => "setup2",
            Setup::Setup3 => "setup3",
        }
    }
}

impl FromStr for Setup {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "setup1" | "1" => Ok(Setup::Setup1),
            "setup2" | "2" => Ok(Setup::Setup2),
            "setup3" | "3" => Ok(Setup::Setup3),
            other => Err(domain(format!("unknown setup '{other}' (expected setup1, setup2 or setup3)"))),
        }
    }
}

/// A named density list: a built-in setup or a custom grammar string.
#[derive(Debug, Clone, PartialEq)]
pub struct DensitySpec {
    pub label: String,
    pub densities: ComponentDensities,
}

impl DensitySpec {
    pub fn setup(s: Setup) -> Self {
        Self { label: s.name().into(), densities: s.densities() }
    }
}

impl FromStr for DensitySpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Ok(setup) = s.parse::<Setup>() {
            return Ok(Self::setup(setup));
        }
        let densities: ComponentDensities = s.parse()?;
        Ok(Self { label: densities.to_string(), densities })
    }
}

impl fmt::Display for DensitySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PreliminaryKind {
    Fobi,
    FastIca,
}

impl PreliminaryKind {
    pub fn name(self) -> &'static str {
        match self {
            PreliminaryKind::Fobi => "fobi",
            PreliminaryKind::FastIca => "fastica",
        }
    }
}

impl FromStr for PreliminaryKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "fobi" => Ok(PreliminaryKind::Fobi),
            "fastica" | "fica" => Ok(PreliminaryKind::FastIca),
            other => Err(domain(format!("unknown preliminary estimator '{other}' (expected fobi or fastica)"))),
        }
    }
}

/// One estimator evaluated in an estimation campaign.
#[derive(Debug, Clone, PartialEq)]
pub enum EstimatorSpec {
    Competitor(PreliminaryKind),
    R { target: DensitySpec, preliminary: PreliminaryKind },
}

impl EstimatorSpec {
    pub fn label(&self) -> String {
        match self {
            EstimatorSpec::Competitor(k) => k.name().into(),
            EstimatorSpec::R { target, preliminary } => format!("R[{target}|{}]", preliminary.name()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationConfig {
    pub model: DensitySpec,
    pub l_true: MixingMatrix,
    pub mu_true: Vector,
    pub n: usize,
    pub replications: usize,
    pub master_seed: u64,
    pub competitors: Vec<PreliminaryKind>,
    pub targets: Vec<DensitySpec>,
    pub preliminaries: Vec<PreliminaryKind>,
    pub line_search: LineSearchOptions,
    pub discretize: Option<f64>,
    pub execution: Execution,
}

impl SimulationConfig {
    /// Identity mixing, zero location, all three setup targets over both
    /// preliminaries, desk-scale replication count.
    pub fn for_setup(setup: Setup, n: usize) -> Self {
        Self {
            model: DensitySpec::setup(setup),
            l_true: MixingMatrix::identity(2),
            mu_true: Vector::zeros(2),
            n,
            replications: DESK_REPLICATIONS,
            master_seed: 1,
            competitors: vec![PreliminaryKind::Fobi, PreliminaryKind::FastIca],
            targets: Setup::ALL.iter().map(|&s| DensitySpec::setup(s)).collect(),
            preliminaries: vec![PreliminaryKind::Fobi, PreliminaryKind::FastIca],
            line_search: LineSearchOptions::default(),
            discretize: None,
            execution: Execution::default(),
        }
    }

    pub fn dim(&self) -> usize {
        self.model.densities.dim()
    }

    pub fn estimators(&self) -> Vec<EstimatorSpec> {
        let mut out: Vec<EstimatorSpec> = self.competitors.iter().map(|&k| EstimatorSpec::Competitor(k)).collect();
        for t in &self.targets {
            for &k in &self.preliminaries {
                out.push(EstimatorSpec::R { target: t.clone(), preliminary: k });
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.dim();
        self.model.densities.validate_generating()?;
        if self.l_true.dim() != p || self.mu_true.len() != p {
            return Err(Error::Dimension {
                expected: format!("L and mu of dimension {p}"),
                found: format!("{} and {}", self.l_true.dim(), self.mu_true.len()),
            });
        }
        if let Some(t) = self.targets.iter().find(|t| t.densities.dim() != p) {
            return Err(Error::Dimension { expected: format!("{p} target densities"), found: format!("'{t}'") });
        }
        if self.n < 2 * p {
            return Err(Error::InsufficientData { n: self.n, need: 2 * p });
        }
        if self.replications == 0 {
            return Err(domain("replications must be at least 1"));
        }
        Ok(())
    }

    /// Apply `key = value` pairs on top of this configuration.
    pub fn apply(&mut self, entries: &BTreeMap<String, String>) -> Result<()> {
        for (key, value) in entries {
            self.apply_one(key, value)?;
        }
        Ok(())
    }

    fn apply_one(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key {
            "setup" | "g" | "model" => {
                self.model = v.parse()?;
                let p = self.dim();
                if self.l_true.dim() != p {
                    self.l_true = MixingMatrix::identity(p);
                    self.mu_true = Vector::zeros(p);
                }
            }
            "n" => self.n = parse_num(key, v)?,
            "replications" | "m" => self.replications = parse_num(key, v)?,
            "seed" => self.master_seed = parse_num(key, v)?,
            "c" => self.line_search.c = parse_num(key, v)?,
            "lambda_max" => self.line_search.lambda_max = parse_num(key, v)?,
            "discretize" => {
                self.discretize = match v.to_ascii_lowercase().as_str() {
                    "off" | "none" | "false" => None,
                    _ => Some(parse_num(key, v)?),
                }
            }
            "targets" => self.targets = split_list(v, ';').map(str::parse).collect::<Result<_>>()?,
            "preliminaries" => self.preliminaries = split_list(v, ',').map(str::parse).collect::<Result<_>>()?,
            "competitors" => self.competitors = split_list(v, ',').map(str::parse).collect::<Result<_>>()?,
            "l_true" => self.l_true = MixingMatrix::new(parse_inline_matrix(v)?)?,
            "mu_true" => self.mu_true = Vector::from_vec(split_list(v, ',').map(|x| parse_num(key, x)).collect::<Result<_>>()?),
            "execution" => {
                self.execution = match v {
                    "sequential" => Execution::Sequential,
                    "parallel" => Execution::Parallel,
                    other => return Err(domain(format!("unknown execution policy '{other}'"))),
                }
            }
            _ => return Err(domain(format!("unknown configuration key '{key}'"))),
        }
        Ok(())
    }

    /// Human-readable echo of every setting, one `key = value` per line.
    pub fn echo(&self) -> String {
        let rows: Vec<String> = self.l_true.matrix().row_iter().map(|r| join(r.iter())).collect();
        [
            format!("model = {}", self.model.densities),
            format!("model_label = {}", self.model.label),
            format!("l_true = {}", rows.join("; ")),
            format!("mu_true = {}", join(self.mu_true.iter())),
            format!("n = {}", self.n),
            format!("replications = {}", self.replications),
            format!("seed = {}", self.master_seed),
            format!("competitors = {}", self.competitors.iter().map(|k| k.name()).collect::<Vec<_>>().join(", ")),
            format!("targets = {}", self.targets.iter().map(|t| t.label.as_str()).collect::<Vec<_>>().join("; ")),
            format!("preliminaries = {}", self.preliminaries.iter().map(|k| k.name()).collect::<Vec<_>>().join(", ")),
            format!("c = {}", self.line_search.c),
            format!("lambda_max = {}", self.line_search.lambda_max),
            format!("discretize = {}", self.discretize.map_or("off".to_string(), |c| c.to_string())),
        ]
        .join("\n")
    }
}

fn join<'a>(it: impl Iterator<Item = &'a f64>) -> String {
    it.map(|v| v.to_string()).collect::<Vec<_>>().join(", ")
}

fn split_list(v: &str, sep: char) -> impl Iterator<Item = &str> {
    v.split(sep).map(str::trim).filter(|s| !s.is_empty())
}

fn parse_num<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.trim().parse().map_err(|_| domain(format!("invalid value '{v}' for '{key}'")))
}

/// Rows separated by `;`, entries by `,`.
pub fn parse_inline_matrix(v: &str) -> Result<Matrix> {
    let rows: Vec<Vec<f64>> = split_list(v, ';')
        .map(|row| split_list(row, ',').map(|x| parse_num("matrix entry", x)).collect::<Result<Vec<f64>>>())
        .collect::<Result<_>>()?;
    let cols = rows.first().map_or(0, Vec::len);
    if rows.is_empty() || rows.iter().any(|r| r.len() != cols) {
        return Err(domain(format!("ragged or empty inline matrix '{v}'")));
    }
    Ok(Matrix::from_row_iterator(rows.len(), cols, rows.into_iter().flatten()))
}

/// Parse `key = value` lines; `#` starts a comment. Keys are lowercased.
pub fn parse_config_text(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (k, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::Parse { line: k + 1, msg: format!("expected 'key = value', found '{line}'") })?;
        out.insert(key.trim().to_ascii_lowercase().replace('-', "_"), value.trim().to_string());
    }
    Ok(out)
}

pub fn read_config_file(path: impl AsRef<Path>) -> Result<BTreeMap<String, String>> {
    parse_config_text(&std::fs::read_to_string(path)?)
}
