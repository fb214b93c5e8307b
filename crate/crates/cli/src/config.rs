//! JSON run configuration.

use std::fmt;
use std::path::Path;

use holdnet::scenarios::{BernoulliShockSpec, DistributionSource};
use holdnet::{
    CapitalGrid, CapitalPoint, Distribution64, HoldingType, LayerParams64, RegionTable,
    SolverOptions64, SupportLevel,
};
use serde::de::{self, MapAccess, SeqAccess, Visitor};
use serde::{Deserialize, Deserializer};
use sha2::{Digest, Sha256};

const PROBABILITY_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub path: String,
    pub line: Option<usize>,
    pub column: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.line, self.column) {
            (Some(l), Some(c)) => write!(f, "{}:{l}:{c}: {}", self.path, self.message),
            (Some(l), None) => write!(f, "{}:{l}: {}", self.path, self.message),
            _ => write!(f, "{}: {}", self.path, self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub holding_type: HoldingType,
    pub support_level: SupportLevel,
    pub p1: f64,
    pub p2: f64,
    pub r_max: i32,
    pub capital_distribution: CapitalDistribution,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub simulation: Option<SimulationConfig>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum CapitalDistribution {
    Explicit(Vec<ExplicitEntry>),
    BernoulliShock(BernoulliBlock),
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExplicitEntry {
    pub c1: i32,
    pub c2: i32,
    pub prob: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BernoulliBlock {
    pub r1: i32,
    pub r2: i32,
    pub eps1: f64,
    pub eps2: f64,
    #[serde(default = "default_independent")]
    pub independent: bool,
}

fn default_independent() -> bool {
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
}

fn default_tol() -> f64 {
    1e-12
}

fn default_max_iter() -> usize {
    1_000_000
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tol: default_tol(),
            max_iter: default_max_iter(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    pub n: usize,
    pub trials: usize,
    pub seed: u64,
}

impl<'de> Deserialize<'de> for CapitalDistribution {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct V;

        impl<'de> Visitor<'de> for V {
            type Value = CapitalDistribution;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(
                    "a list of {c1, c2, prob} entries or {\"bernoulli_shock\": {r1, r2, eps1, eps2}}",
                )
            }

            fn visit_seq<A: SeqAccess<'de>>(self, mut seq: A) -> Result<Self::Value, A::Error> {
                let mut out = Vec::new();
                while let Some(e) = seq.next_element()? {
                    out.push(e);
                }
                Ok(CapitalDistribution::Explicit(out))
            }

            fn visit_map<A: MapAccess<'de>>(self, mut map: A) -> Result<Self::Value, A::Error> {
                let mut block = None;
                while let Some(key) = map.next_key::<String>()? {
                    if key != "bernoulli_shock" {
                        return Err(de::Error::unknown_field(&key, &["bernoulli_shock"]));
                    }
                    if block.is_some() {
                        return Err(de::Error::duplicate_field("bernoulli_shock"));
                    }
                    block = Some(map.next_value()?);
                }
                block
                    .map(CapitalDistribution::BernoulliShock)
                    .ok_or_else(|| de::Error::missing_field("bernoulli_shock"))
            }
        }

        deserializer.deserialize_any(V)
    }
}

/// A validated configuration together with the digest of its source bytes.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: RunConfig,
    pub sha256: String,
    pub grid: CapitalGrid,
    pub dist: Distribution64,
}

impl LoadedConfig {
    pub fn table(&self) -> RegionTable {
        RegionTable::on_grid(self.config.holding_type, self.grid)
    }

    pub fn params(&self) -> LayerParams64 {
        LayerParams64::new(self.config.p1, self.config.p2).expect("validated on load")
    }

    pub fn solver(&self) -> SolverOptions64 {
        SolverOptions64 {
            tol: self.config.solver.tol,
            max_iter: self.config.solver.max_iter,
            accelerate: false,
        }
    }
}

impl RunConfig {
    pub fn source(&self) -> DistributionSource {
        match &self.capital_distribution {
            CapitalDistribution::Explicit(entries) => DistributionSource::Explicit(
                entries
                    .iter()
                    .map(|e| (CapitalPoint::new(e.c1, e.c2), e.prob))
                    .collect(),
            ),
            CapitalDistribution::BernoulliShock(b) => DistributionSource::Bernoulli(BernoulliShockSpec {
                r1: b.r1,
                r2: b.r2,
                eps1: b.eps1,
                eps2: b.eps2,
                independent: b.independent,
            }),
        }
    }
}

/// 1-based line of the first occurrence of `"key"` in `text`.
fn line_of(text: &str, key: &str) -> Option<usize> {
    let needle = format!("\"{key}\"");
    text.lines().position(|l| l.contains(&needle)).map(|i| i + 1)
}

pub fn load(path: &Path) -> Result<LoadedConfig, ConfigError> {
    let name = path.display().to_string();
    let bytes = std::fs::read(path).map_err(|e| ConfigError {
        path: name.clone(),
        line: None,
        column: None,
        message: e.to_string(),
    })?;
    parse(&name, &bytes)
}

pub fn parse(name: &str, bytes: &[u8]) -> Result<LoadedConfig, ConfigError> {
    let sha256 = hex::encode(Sha256::digest(bytes));
    let config: RunConfig = serde_json::from_slice(bytes).map_err(|e| ConfigError {
        path: name.to_string(),
        line: Some(e.line()),
        column: Some(e.column()),
        message: e.to_string().split(" at line ").next().unwrap_or_default().to_string(),
    })?;
    let text = String::from_utf8_lossy(bytes);
    let fail = |key: &str, message: String| ConfigError {
        path: name.to_string(),
        line: line_of(&text, key),
        column: None,
        message: format!("{key}: {message}"),
    };

    for (key, p) in [("p1", config.p1), ("p2", config.p2)] {
        if !p.is_finite() || p < 0.0 {
            return Err(fail(key, format!("{p} must be a nonnegative real")));
        }
    }
    if config.r_max < 1 {
        return Err(fail("r_max", format!("{} must be at least 1", config.r_max)));
    }
    let grid = CapitalGrid::for_support(config.support_level, config.r_max)
        .map_err(|e| fail("support_level", e.to_string()))?;
    if let CapitalDistribution::Explicit(entries) = &config.capital_distribution {
        if entries.is_empty() {
            return Err(fail("capital_distribution", "no entries".into()));
        }
        for e in entries {
            if !(0.0..=1.0).contains(&e.prob) {
                return Err(fail(
                    "capital_distribution",
                    format!("prob {} at ({}, {}) must lie in [0, 1]", e.prob, e.c1, e.c2),
                ));
            }
        }
        let total: f64 = entries.iter().map(|e| e.prob).sum();
        if (total - 1.0).abs() > PROBABILITY_TOLERANCE {
            return Err(fail(
                "capital_distribution",
                format!("probabilities sum to {total}, not 1"),
            ));
        }
    }
    let dist = config
        .source()
        .build(grid)
        .map_err(|e| fail("capital_distribution", e.to_string()))?;
    let s = config.solver;
    if !(s.tol.is_finite() && s.tol > 0.0) {
        return Err(fail("tol", format!("{} must be positive", s.tol)));
    }
    if s.max_iter == 0 {
        return Err(fail("max_iter", "must be at least 1".into()));
    }
    if let Some(sim) = config.simulation {
        if sim.n < 2 {
            return Err(fail("n", format!("{} must be at least 2", sim.n)));
        }
        if sim.trials == 0 {
            return Err(fail("trials", "must be at least 1".into()));
        }
        for (key, p) in [("p1", config.p1), ("p2", config.p2)] {
            if p > sim.n as f64 {
                return Err(fail(key, format!("{p} exceeds the network size {}", sim.n)));
            }
        }
    }
    Ok(LoadedConfig {
        config,
        sha256,
        grid,
        dist,
    })
}
