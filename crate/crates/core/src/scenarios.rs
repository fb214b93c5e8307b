//! Bernoulli-shock case studies, ex-post shocks and support-level sweeps.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analytic::LayerParams;
use crate::capital::{
    CapitalError, CapitalGrid, CapitalPoint, HoldingType, JointCapitalDistribution, RegionTable,
    SupportLevel,
};
use crate::fixed_point::{least_joint_root, SolverOptions};
use crate::scalar::Scalar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScenarioError {
    #[error("invalid scenario: {0}")]
    InvalidSpec(String),
    #[error("shock fraction {0} must lie in (0, 1]")]
    InvalidFraction(f64),
    #[error("base distribution has default mass {mass}; shocks apply to an uninfected network")]
    InfectedBase { mass: f64 },
    #[error("shock maps {from} to {to}, which is not strictly below it")]
    InvalidShock { from: CapitalPoint, to: CapitalPoint },
    #[error("shock produces no initial defaults")]
    DegenerateShock,
    #[error("report has no rows")]
    EmptyReport,
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("malformed figure data: {0}")]
    Parse(String),
    #[error(transparent)]
    Capital(#[from] CapitalError),
}

/// `P(C_l = x) = ε_l = 1 − P(C_l = r_l)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BernoulliShockSpec {
    pub r1: i32,
    pub r2: i32,
    pub eps1: f64,
    pub eps2: f64,
    /// Independent shocks across types; otherwise the two shocks overlap
    /// maximally, `P((x, x)) = min(ε₁, ε₂)`.
    #[serde(default = "default_true")]
    pub independent: bool,
}

fn default_true() -> bool {
    true
}

impl BernoulliShockSpec {
    pub fn independent(r1: i32, r2: i32, eps1: f64, eps2: f64) -> Self {
        Self {
            r1,
            r2,
            eps1,
            eps2,
            independent: true,
        }
    }

    fn validate(&self, grid: &CapitalGrid) -> Result<(), ScenarioError> {
        for (name, r) in [("r1", self.r1), ("r2", self.r2)] {
            if r < 1 {
                return Err(ScenarioError::InvalidSpec(format!("{name} = {r} must be positive")));
            }
            if r > grid.r_max() {
                return Err(CapitalError::AboveCap {
                    c1: self.r1,
                    c2: self.r2,
                    r_max: grid.r_max(),
                }
                .into());
            }
        }
        for (name, e) in [("eps1", self.eps1), ("eps2", self.eps2)] {
            if !(0.0..=1.0).contains(&e) {
                return Err(ScenarioError::InvalidSpec(format!("{name} = {e} must lie in [0, 1]")));
            }
        }
        Ok(())
    }
}

/// The four-point law on `{(r₁,r₂), (r₁,x), (x,r₂), (x,x)}` with `x` the
/// grid floor.
pub fn bernoulli_distribution(
    spec: &BernoulliShockSpec,
    grid: CapitalGrid,
) -> Result<JointCapitalDistribution<f64>, ScenarioError> {
    spec.validate(&grid)?;
    let x = grid.x_floor();
    let (e1, e2) = (spec.eps1, spec.eps2);
    let both = if spec.independent { e1 * e2 } else { e1.min(e2) };
    let only1 = e1 - both;
    let only2 = e2 - both;
    let none = if spec.independent {
        (1.0 - e1) * (1.0 - e2)
    } else {
        1.0 - e1.max(e2)
    };
    let entries = [
        (CapitalPoint::new(spec.r1, spec.r2), none),
        (CapitalPoint::new(x, spec.r2), only1),
        (CapitalPoint::new(spec.r1, x), only2),
        (CapitalPoint::new(x, x), both),
    ];
    Ok(JointCapitalDistribution::new(
        grid,
        entries.into_iter().filter(|&(_, m)| m > 0.0),
    )?)
}

/// How a shocked holding's capitals move.
#[derive(Debug, Clone, Copy)]
pub enum ShockRule {
    /// Both subsidiaries to the floor.
    ToFloor,
    /// Subsidiary 1 only to the floor.
    FirstToFloor,
    /// Subsidiary 2 only to the floor.
    SecondToFloor,
    /// Fixed capital losses `(d₁, d₂)`, clipped at the floor.
    Subtract { d1: i32, d2: i32 },
    Custom(fn(CapitalPoint) -> CapitalPoint),
}

impl ShockRule {
    pub fn apply(&self, p: CapitalPoint, x_floor: i32) -> CapitalPoint {
        match *self {
            ShockRule::ToFloor => CapitalPoint::new(x_floor, x_floor),
            ShockRule::FirstToFloor => CapitalPoint::new(x_floor, p.c2),
            ShockRule::SecondToFloor => CapitalPoint::new(p.c1, x_floor),
            ShockRule::Subtract { d1, d2 } => {
                CapitalPoint::new((p.c1 - d1).max(x_floor), (p.c2 - d2).max(x_floor))
            }
            ShockRule::Custom(f) => f(p),
        }
    }
}

/// `(1 − ε)·base + ε·rule(base)` for an uninfected `base`.
///
/// The rule must move every support point strictly downward (component-wise
/// `≤` and not equal), and the result must carry positive default mass.
pub fn apply_shock<S: Scalar>(
    base: &JointCapitalDistribution<S>,
    table: &RegionTable,
    fraction: S,
    rule: ShockRule,
) -> Result<JointCapitalDistribution<S>, ScenarioError> {
    table.check_grid(base.grid())?;
    let f = fraction.to_f64().unwrap_or(f64::NAN);
    if !(f > 0.0 && f <= 1.0) {
        return Err(ScenarioError::InvalidFraction(f));
    }
    let mass = table.initial_default_mass(base)?;
    if mass > S::zero() {
        return Err(ScenarioError::InfectedBase {
            mass: mass.to_f64().unwrap_or(f64::NAN),
        });
    }
    let grid = *base.grid();
    for (p, _) in base.support() {
        let q = grid.clip(rule.apply(p, grid.x_floor()));
        if !q.dominated_by(p) || q == p {
            return Err(ScenarioError::InvalidShock { from: p, to: q });
        }
    }
    let x = grid.x_floor();
    let shocked = base.push_forward(|p| rule.apply(p, x))?;
    let out = base.mix(&shocked, fraction)?;
    if table.initial_default_mass(&out)? <= S::zero() {
        return Err(ScenarioError::DegenerateShock);
    }
    Ok(out)
}

/// Where the capital distribution of each swept support level comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum DistributionSource {
    /// Shocked subsidiaries sit at the swept floor.
    Bernoulli(BernoulliShockSpec),
    /// Fixed points; those below a swept floor are clipped onto it.
    Explicit(Vec<(CapitalPoint, f64)>),
}

impl DistributionSource {
    pub fn build(&self, grid: CapitalGrid) -> Result<JointCapitalDistribution<f64>, ScenarioError> {
        match self {
            DistributionSource::Bernoulli(spec) => bernoulli_distribution(spec, grid),
            DistributionSource::Explicit(entries) => Ok(JointCapitalDistribution::with_tolerance(
                grid,
                entries.iter().copied(),
                1e-9,
            )?),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub holding: HoldingType,
    pub params: LayerParams<f64>,
    pub r_max: i32,
    pub source: DistributionSource,
    pub solver: SolverOptions<f64>,
    /// Objective weights on `(ẑ₁, ẑ₂)`.
    pub weights: [f64; 2],
}

impl SweepConfig {
    pub fn new(
        holding: HoldingType,
        params: LayerParams<f64>,
        r_max: i32,
        source: DistributionSource,
    ) -> Self {
        Self {
            holding,
            params,
            r_max,
            source,
            solver: SolverOptions::default(),
            weights: [1.0, 1.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub x: SupportLevel,
    /// Integer floor used on the grid.
    pub x_floor: i32,
    pub z1: Option<f64>,
    pub z2: Option<f64>,
    pub total: Option<f64>,
    pub direction_ok: Option<bool>,
    /// `ρ(M(ẑ))`.
    pub spectral_radius: Option<f64>,
    pub error: Option<String>,
}

impl SweepRow {
    fn failed(x: SupportLevel, x_floor: i32, error: String) -> Self {
        Self {
            x,
            x_floor,
            z1: None,
            z2: None,
            total: None,
            direction_ok: None,
            spectral_radius: None,
            error: Some(error),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub holding: HoldingType,
    pub weights: [f64; 2],
    /// Ordered from the shallowest to the deepest support.
    pub rows: Vec<SweepRow>,
    /// Support level minimising `w₁ẑ₁ + w₂ẑ₂`; ties go to the larger `x`.
    pub argmin_total: Option<SupportLevel>,
}

impl SweepReport {
    pub fn row(&self, x: SupportLevel) -> Option<&SweepRow> {
        self.rows.iter().find(|r| r.x == x)
    }

    /// Every float rounded to `digits` significant digits.
    pub fn rounded(&self, digits: usize) -> Self {
        let r = |v: Option<f64>| v.map(|v| round_sig(v, digits));
        Self {
            holding: self.holding,
            weights: self.weights,
            rows: self
                .rows
                .iter()
                .map(|row| SweepRow {
                    z1: r(row.z1),
                    z2: r(row.z2),
                    total: r(row.total),
                    spectral_radius: r(row.spectral_radius),
                    ..row.clone()
                })
                .collect(),
            argmin_total: self.argmin_total,
        }
    }
}

fn solve_row(config: &SweepConfig, x: SupportLevel) -> SweepRow {
    let x_floor = x.canonical(config.r_max);
    let result = (|| -> Result<SweepRow, String> {
        let grid = CapitalGrid::new(x_floor, config.r_max).map_err(|e| e.to_string())?;
        let dist = config.source.build(grid).map_err(|e| e.to_string())?;
        let table = RegionTable::on_grid(config.holding, grid);
        let root = least_joint_root(&dist, &table, config.params, &config.solver)
            .map_err(|e| e.to_string())?;
        let [z1, z2] = root.z_hat;
        Ok(SweepRow {
            x,
            x_floor,
            z1: Some(z1),
            z2: Some(z2),
            total: Some(z1 + z2),
            direction_ok: Some(root.direction_ok),
            spectral_radius: Some(root.spectral_radius),
            error: None,
        })
    })();
    result.unwrap_or_else(|e| SweepRow::failed(x, x_floor, e))
}

/// Solves the least joint root at every support level; failures are kept
/// as rows carrying the error.
pub fn sweep_support(config: &SweepConfig, xs: &[SupportLevel]) -> SweepReport {
    let mut rows: Vec<SweepRow> = xs.par_iter().map(|&x| solve_row(config, x)).collect();
    rows.sort_by_key(|r| std::cmp::Reverse(r.x_floor));
    let mut best: Option<(f64, i32, SupportLevel)> = None;
    for row in &rows {
        if let (Some(z1), Some(z2)) = (row.z1, row.z2) {
            let obj = config.weights[0] * z1 + config.weights[1] * z2;
            let better = match best {
                None => true,
                Some((b, bx, _)) => obj < b || (obj == b && row.x_floor > bx),
            };
            if better {
                best = Some((obj, row.x_floor, row.x));
            }
        }
    }
    SweepReport {
        holding: config.holding,
        weights: config.weights,
        rows,
        argmin_total: best.map(|b| b.2),
    }
}

/// The support levels `0, −1, …, −depth`.
pub fn support_range(depth: i32) -> Vec<SupportLevel> {
    (0..=depth).map(|k| SupportLevel::Finite(-k)).collect()
}

/// `v` rounded to `digits` significant decimal digits.
pub fn round_sig(v: f64, digits: usize) -> f64 {
    if v == 0.0 || !v.is_finite() {
        return v;
    }
    format!("{:.*e}", digits.saturating_sub(1), v)
        .parse()
        .expect("formatted float parses")
}

/// Shortest decimal form of `v` rounded to `digits` significant digits;
/// magnitudes outside `[1e-4, 1e15)` use exponent notation.
pub fn format_sig(v: f64, digits: usize) -> String {
    let r = round_sig(v, digits);
    if r != 0.0 && r.is_finite() && !(1e-4..1e15).contains(&r.abs()) {
        format!("{r:e}")
    } else {
        format!("{r}")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FigureFormat {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Precision {
    /// Shortest representation that round-trips.
    Full,
    Significant(usize),
}

/// One plotted point: `x, z1, z2, total, direction_ok`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FigureRow {
    pub x: SupportLevel,
    pub z1: Option<f64>,
    pub z2: Option<f64>,
    pub total: Option<f64>,
    pub direction_ok: Option<bool>,
}

impl From<&SweepRow> for FigureRow {
    fn from(r: &SweepRow) -> Self {
        Self {
            x: r.x,
            z1: r.z1,
            z2: r.z2,
            total: r.total,
            direction_ok: r.direction_ok,
        }
    }
}

pub const FIGURE_COLUMNS: [&str; 5] = ["x", "z1", "z2", "total", "direction_ok"];

/// The data behind a support-level figure as CSV (`x,z1,z2,total,direction_ok`)
/// or as the JSON report.
pub fn emit_figure_data(
    report: &SweepReport,
    format: FigureFormat,
    precision: Precision,
) -> Result<String, ScenarioError> {
    if report.rows.is_empty() {
        return Err(ScenarioError::EmptyReport);
    }
    let report = match precision {
        Precision::Full => report.clone(),
        Precision::Significant(d) => report.rounded(d),
    };
    match format {
        FigureFormat::Json => serde_json::to_string_pretty(&report)
            .map(|s| s + "\n")
            .map_err(|e| ScenarioError::Parse(e.to_string())),
        FigureFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            let io = |e: csv::Error| ScenarioError::Parse(e.to_string());
            w.write_record(FIGURE_COLUMNS).map_err(io)?;
            let num = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
            for row in &report.rows {
                w.write_record([
                    row.x.to_string(),
                    num(row.z1),
                    num(row.z2),
                    num(row.total),
                    row.direction_ok.map(|b| b.to_string()).unwrap_or_default(),
                ])
                .map_err(io)?;
            }
            let bytes = w.into_inner().map_err(|e| ScenarioError::Parse(e.to_string()))?;
            Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
        }
    }
}

/// Writes [`emit_figure_data`] output to `path`.
pub fn write_figure_data(
    report: &SweepReport,
    format: FigureFormat,
    precision: Precision,
    path: &Path,
) -> Result<(), ScenarioError> {
    let text = emit_figure_data(report, format, precision)?;
    std::fs::write(path, text).map_err(|e| ScenarioError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

fn parse_support(s: &str) -> Result<SupportLevel, ScenarioError> {
    if s == "neg_infinity" {
        return Ok(SupportLevel::Unbounded);
    }
    let v: i32 = s
        .parse()
        .map_err(|_| ScenarioError::Parse(format!("bad support level {s:?}")))?;
    Ok(SupportLevel::finite(v)?)
}

/// Reads CSV produced by [`emit_figure_data`]; lines starting with `#` are
/// skipped.
pub fn parse_figure_csv(text: &str) -> Result<Vec<FigureRow>, ScenarioError> {
    let mut r = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let perr = |e: csv::Error| ScenarioError::Parse(e.to_string());
    let headers = r.headers().map_err(perr)?.clone();
    if headers.iter().ne(FIGURE_COLUMNS) {
        return Err(ScenarioError::Parse(format!("unexpected header {headers:?}")));
    }
    let opt_f = |s: &str| -> Result<Option<f64>, ScenarioError> {
        if s.is_empty() {
            Ok(None)
        } else {
            s.parse()
                .map(Some)
                .map_err(|_| ScenarioError::Parse(format!("bad number {s:?}")))
        }
    };
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(perr)?;
        let direction_ok = match &rec[4] {
            "" => None,
            "true" => Some(true),
            "false" => Some(false),
            other => return Err(ScenarioError::Parse(format!("bad flag {other:?}"))),
        };
        rows.push(FigureRow {
            x: parse_support(&rec[0])?,
            z1: opt_f(&rec[1])?,
            z2: opt_f(&rec[2])?,
            total: opt_f(&rec[3])?,
            direction_ok,
        });
    }
    Ok(rows)
}
