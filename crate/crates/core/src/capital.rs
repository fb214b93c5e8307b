//! Capital grid, holding types, joint capital distributions and the set
//! algebra of default regions.
//!
//! Capitals are integers on the grid `([x, R] ∩ ℤ)²`. A holding of type A
//! carries joint liability: once the holding capital `c₁ + c₂` is
//! non-positive, subsidiary `l` defaults as long as `c_l ≤ −x`. A holding of
//! type B only supports a subsidiary whose own capital is non-positive.
//! Either way a subsidiary whose capital has reached the floor `x` is given
//! up. Shocks that push a coordinate below the floor are clipped to it.

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::scalar::{CompensatedSum, Scalar};

/// Maximum deviation of a distribution's total mass from one.
pub const MASS_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CapitalError {
    #[error("support level {0} must be non-positive")]
    PositiveSupport(i32),
    #[error("capital cap {0} must be non-negative")]
    NegativeCap(i32),
    #[error("capital point ({c1}, {c2}) exceeds the cap {r_max}")]
    AboveCap { c1: i32, c2: i32, r_max: i32 },
    #[error("probability mass {0} at ({1}, {2}) is negative or not finite")]
    InvalidMass(f64, i32, i32),
    #[error("distribution masses sum to {total}, expected 1 within {tolerance}")]
    NotNormalized { total: f64, tolerance: f64 },
    #[error("grids differ: [{a_floor}, {a_cap}] vs [{b_floor}, {b_cap}]")]
    GridMismatch {
        a_floor: i32,
        a_cap: i32,
        b_floor: i32,
        b_cap: i32,
    },
}

/// Organisational form shared by every holding in a network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum HoldingType {
    /// Full liability: supporting one subsidiary drains the other.
    A,
    /// Limited liability: support is funded outside the network.
    B,
}

impl fmt::Display for HoldingType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HoldingType::A => f.write_str("A"),
            HoldingType::B => f.write_str("B"),
        }
    }
}

/// Subsidiary type, equivalently the network layer it trades in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Layer {
    One,
    Two,
}

impl Layer {
    pub const BOTH: [Layer; 2] = [Layer::One, Layer::Two];

    pub fn index(self) -> usize {
        match self {
            Layer::One => 0,
            Layer::Two => 1,
        }
    }

    pub fn other(self) -> Layer {
        match self {
            Layer::One => Layer::Two,
            Layer::Two => Layer::One,
        }
    }
}

/// Global support level `x ≤ 0`, or unlimited support.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SupportLevel {
    Finite(i32),
    Unbounded,
}

impl SupportLevel {
    pub fn finite(x: i32) -> Result<Self, CapitalError> {
        if x > 0 {
            return Err(CapitalError::PositiveSupport(x));
        }
        Ok(SupportLevel::Finite(x))
    }

    /// The integer floor used on a grid capped at `r_max`.
    pub fn canonical(self, r_max: i32) -> i32 {
        canonicalize_support(self, r_max)
    }
}

impl fmt::Display for SupportLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SupportLevel::Finite(x) => write!(f, "{x}"),
            SupportLevel::Unbounded => f.write_str("neg_infinity"),
        }
    }
}

impl Serialize for SupportLevel {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            SupportLevel::Finite(x) => serializer.serialize_i32(*x),
            SupportLevel::Unbounded => serializer.serialize_str("neg_infinity"),
        }
    }
}

impl<'de> Deserialize<'de> for SupportLevel {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Int(i64),
            Text(String),
        }
        match Raw::deserialize(deserializer)? {
            Raw::Int(v) => {
                let v = i32::try_from(v).map_err(serde::de::Error::custom)?;
                SupportLevel::finite(v).map_err(serde::de::Error::custom)
            }
            Raw::Text(s) if s == "neg_infinity" => Ok(SupportLevel::Unbounded),
            Raw::Text(s) => Err(serde::de::Error::custom(format!(
                "support level must be a non-positive integer or \"neg_infinity\", got {s:?}"
            ))),
        }
    }
}

/// Maps unlimited support to the floor `−(R+1)`.
///
/// With capitals bounded by `R`, a coordinate at `−R` already forces the
/// holding sum to be non-positive, so this floor is exact.
pub fn canonicalize_support(x: SupportLevel, r_max: i32) -> i32 {
    match x {
        SupportLevel::Finite(v) => v,
        SupportLevel::Unbounded => -(r_max + 1),
    }
}

/// Pair of subsidiary capitals of one holding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CapitalPoint {
    pub c1: i32,
    pub c2: i32,
}

impl CapitalPoint {
    pub const fn new(c1: i32, c2: i32) -> Self {
        Self { c1, c2 }
    }

    pub fn get(self, layer: Layer) -> i32 {
        match layer {
            Layer::One => self.c1,
            Layer::Two => self.c2,
        }
    }

    pub fn with(self, layer: Layer, value: i32) -> Self {
        match layer {
            Layer::One => Self { c1: value, ..self },
            Layer::Two => Self { c2: value, ..self },
        }
    }

    /// Component-wise `≤`.
    pub fn dominated_by(self, other: CapitalPoint) -> bool {
        self.c1 <= other.c1 && self.c2 <= other.c2
    }
}

impl fmt::Display for CapitalPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.c1, self.c2)
    }
}

/// The square grid `([x_floor, r_max] ∩ ℤ)²`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CapitalGrid {
    x_floor: i32,
    r_max: i32,
}

impl CapitalGrid {
    pub fn new(x_floor: i32, r_max: i32) -> Result<Self, CapitalError> {
        if x_floor > 0 {
            return Err(CapitalError::PositiveSupport(x_floor));
        }
        if r_max < 0 {
            return Err(CapitalError::NegativeCap(r_max));
        }
        Ok(Self { x_floor, r_max })
    }

    pub fn for_support(x: SupportLevel, r_max: i32) -> Result<Self, CapitalError> {
        if r_max < 0 {
            return Err(CapitalError::NegativeCap(r_max));
        }
        Self::new(canonicalize_support(x, r_max), r_max)
    }

    pub fn x_floor(&self) -> i32 {
        self.x_floor
    }

    pub fn r_max(&self) -> i32 {
        self.r_max
    }

    /// Number of integer levels per coordinate.
    pub fn side(&self) -> usize {
        (self.r_max - self.x_floor + 1) as usize
    }

    pub fn len(&self) -> usize {
        self.side() * self.side()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, p: CapitalPoint) -> bool {
        (self.x_floor..=self.r_max).contains(&p.c1) && (self.x_floor..=self.r_max).contains(&p.c2)
    }

    pub fn index(&self, p: CapitalPoint) -> Option<usize> {
        self.contains(p).then(|| {
            let side = self.side();
            (p.c1 - self.x_floor) as usize * side + (p.c2 - self.x_floor) as usize
        })
    }

    pub fn point(&self, index: usize) -> CapitalPoint {
        let side = self.side();
        CapitalPoint::new(
            self.x_floor + (index / side) as i32,
            self.x_floor + (index % side) as i32,
        )
    }

    /// All grid points in index order (row-major in `c1`).
    pub fn points(&self) -> impl Iterator<Item = CapitalPoint> + '_ {
        (0..self.len()).map(move |i| self.point(i))
    }

    /// Raises coordinates below the floor to the floor.
    pub fn clip(&self, p: CapitalPoint) -> CapitalPoint {
        CapitalPoint::new(p.c1.max(self.x_floor), p.c2.max(self.x_floor))
    }

    fn check_same(&self, other: &CapitalGrid) -> Result<(), CapitalError> {
        if self == other {
            Ok(())
        } else {
            Err(CapitalError::GridMismatch {
                a_floor: self.x_floor,
                a_cap: self.r_max,
                b_floor: other.x_floor,
                b_cap: other.r_max,
            })
        }
    }
}

/// Probability mass function of `(C₁, C₂)` on a capital grid, stored densely.
#[derive(Debug, Clone, PartialEq)]
pub struct JointCapitalDistribution<S> {
    grid: CapitalGrid,
    mass: Vec<S>,
}

impl<S: Scalar> JointCapitalDistribution<S> {
    /// Builds a distribution, requiring total mass 1 within [`MASS_TOLERANCE`].
    ///
    /// Points below the floor are clipped onto it; duplicate points add up.
    pub fn new(
        grid: CapitalGrid,
        entries: impl IntoIterator<Item = (CapitalPoint, S)>,
    ) -> Result<Self, CapitalError> {
        Self::with_tolerance(grid, entries, MASS_TOLERANCE)
    }

    /// Like [`new`](Self::new) with a caller-chosen normalisation tolerance;
    /// the accepted masses are rescaled to sum to one.
    pub fn with_tolerance(
        grid: CapitalGrid,
        entries: impl IntoIterator<Item = (CapitalPoint, S)>,
        tolerance: f64,
    ) -> Result<Self, CapitalError> {
        let mut mass = vec![S::zero(); grid.len()];
        for (p, m) in entries {
            if p.c1 > grid.r_max || p.c2 > grid.r_max {
                return Err(CapitalError::AboveCap {
                    c1: p.c1,
                    c2: p.c2,
                    r_max: grid.r_max,
                });
            }
            if !m.is_finite() || m < S::zero() {
                return Err(CapitalError::InvalidMass(
                    m.to_f64().unwrap_or(f64::NAN),
                    p.c1,
                    p.c2,
                ));
            }
            let idx = grid.index(grid.clip(p)).expect("clipped point lies on grid");
            mass[idx] += m;
        }
        let mut total = CompensatedSum::new();
        for &m in &mass {
            total.add(m);
        }
        let total = total.value();
        let total_f = total.to_f64().unwrap_or(f64::NAN);
        if total_f.is_nan() || (total_f - 1.0).abs() > tolerance {
            return Err(CapitalError::NotNormalized {
                total: total_f,
                tolerance,
            });
        }
        if total != S::one() {
            for m in &mut mass {
                *m /= total;
            }
        }
        Ok(Self { grid, mass })
    }

    pub fn point_mass(grid: CapitalGrid, p: CapitalPoint) -> Result<Self, CapitalError> {
        Self::new(grid, [(p, S::one())])
    }

    pub fn grid(&self) -> &CapitalGrid {
        &self.grid
    }

    pub fn masses(&self) -> &[S] {
        &self.mass
    }

    pub fn mass_at(&self, p: CapitalPoint) -> S {
        self.grid
            .index(p)
            .map_or(S::zero(), |i| self.mass[i])
    }

    /// Points carrying positive mass, in grid order.
    pub fn support(&self) -> impl Iterator<Item = (CapitalPoint, S)> + '_ {
        self.mass
            .iter()
            .enumerate()
            .filter(|(_, m)| **m > S::zero())
            .map(move |(i, &m)| (self.grid.point(i), m))
    }

    /// `P(pred(C))`.
    pub fn probability(&self, mut pred: impl FnMut(CapitalPoint) -> bool) -> S {
        let mut acc = CompensatedSum::new();
        for (p, m) in self.support() {
            if pred(p) {
                acc.add(m);
            }
        }
        acc.value()
    }

    /// `P(C ≤ p)` component-wise.
    pub fn cdf(&self, p: CapitalPoint) -> S {
        self.probability(|q| q.dominated_by(p))
    }

    /// Pushes every point through `map` (clipping at the floor).
    pub fn push_forward(
        &self,
        mut map: impl FnMut(CapitalPoint) -> CapitalPoint,
    ) -> Result<Self, CapitalError> {
        let entries: Vec<_> = self.support().map(|(p, m)| (map(p), m)).collect();
        Self::new(self.grid, entries)
    }

    /// The same masses placed on another grid with the same cap; points below
    /// the new floor are clipped onto it.
    pub fn regrid(&self, grid: CapitalGrid) -> Result<Self, CapitalError> {
        let entries: Vec<_> = self.support().collect();
        Self::new(grid, entries)
    }

    /// Mixture `(1 − w)·self + w·other` on a common grid.
    pub fn mix(&self, other: &Self, w: S) -> Result<Self, CapitalError> {
        self.grid.check_same(&other.grid)?;
        let mass = self
            .mass
            .iter()
            .zip(&other.mass)
            .map(|(&a, &b)| (S::one() - w) * a + w * b)
            .collect();
        Ok(Self {
            grid: self.grid,
            mass,
        })
    }
}

/// Default test for a single capital pair, without reference to a grid.
///
/// Subsidiary `l` is in default when `c_l ≤ x`, or when the holding capital
/// is non-positive and `c_l ≤ −x` (type A) or `c_l ≤ 0` (type B).
pub fn in_default_region(holding: HoldingType, x_floor: i32, p: CapitalPoint, layer: Layer) -> bool {
    let own = p.get(layer);
    let other = p.get(layer.other());
    if own <= x_floor {
        return true;
    }
    let cap = match holding {
        HoldingType::A => -x_floor,
        HoldingType::B => 0,
    };
    own + other <= 0 && own <= cap
}

/// Classification of one grid point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct PointClass {
    /// `p ∈ D_{J,l}`.
    pub default: [bool; 2],
    /// `transition[l][m]`: `p ∈ ∂D_{J^{lm}}`, i.e. one more hit to subsidiary
    /// `m` pushes `p` into `D_{J,l}`.
    pub transition: [[bool; 2]; 2],
    /// `p ∈ B_{J,l}`: inside `D_{J,l}` with a grid neighbour above it outside.
    pub entrance: [bool; 2],
}

impl PointClass {
    pub fn in_default(&self, l: Layer) -> bool {
        self.default[l.index()]
    }

    /// `p ∈ ∂D_{J,l} = ∂D_{J^{l1}} ∪ ∂D_{J^{l2}}`.
    pub fn in_boundary(&self, l: Layer) -> bool {
        let row = self.transition[l.index()];
        row[0] || row[1]
    }

    pub fn in_transition(&self, l: Layer, m: Layer) -> bool {
        self.transition[l.index()][m.index()]
    }

    pub fn in_entrance(&self, l: Layer) -> bool {
        self.entrance[l.index()]
    }
}

/// Dense classification of every grid point for one `(J, x, R)` triple.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionTable {
    holding: HoldingType,
    grid: CapitalGrid,
    classes: Vec<PointClass>,
}

impl RegionTable {
    pub fn build(holding: HoldingType, x: SupportLevel, r_max: i32) -> Result<Self, CapitalError> {
        Ok(Self::on_grid(holding, CapitalGrid::for_support(x, r_max)?))
    }

    pub fn on_grid(holding: HoldingType, grid: CapitalGrid) -> Self {
        let x = grid.x_floor();
        let is_default = |p: CapitalPoint, l: Layer| in_default_region(holding, x, p, l);
        let classes = grid
            .points()
            .map(|p| {
                let mut class = PointClass::default();
                for l in Layer::BOTH {
                    let inside = is_default(p, l);
                    class.default[l.index()] = inside;
                    for m in Layer::BOTH {
                        // A hit at the floor is absorbed, so no transition there.
                        let below = p.get(m) - 1;
                        class.transition[l.index()][m.index()] =
                            !inside && below >= x && is_default(p.with(m, below), l);
                    }
                    class.entrance[l.index()] = inside
                        && Layer::BOTH.iter().any(|&m| {
                            let above = p.with(m, p.get(m) + 1);
                            grid.contains(above) && !is_default(above, l)
                        });
                }
                class
            })
            .collect();
        Self {
            holding,
            grid,
            classes,
        }
    }

    pub fn holding(&self) -> HoldingType {
        self.holding
    }

    pub fn grid(&self) -> &CapitalGrid {
        &self.grid
    }

    pub fn classes(&self) -> &[PointClass] {
        &self.classes
    }

    /// Classification of a grid point; `None` off the grid.
    pub fn class(&self, p: CapitalPoint) -> Option<&PointClass> {
        self.grid.index(p).map(|i| &self.classes[i])
    }

    /// Whether `p` (clipped at the floor) lies in `D_{J,l}`.
    pub fn region_membership(&self, p: CapitalPoint, l: Layer) -> bool {
        in_default_region(self.holding, self.grid.x_floor(), self.grid.clip(p), l)
    }

    /// `P(C ∈ D_{J,1} ∪ D_{J,2})`.
    pub fn initial_default_mass<S: Scalar>(
        &self,
        dist: &JointCapitalDistribution<S>,
    ) -> Result<S, CapitalError> {
        self.check_grid(dist.grid())?;
        Ok(dist.probability(|p| {
            self.region_membership(p, Layer::One) || self.region_membership(p, Layer::Two)
        }))
    }

    pub fn check_grid(&self, grid: &CapitalGrid) -> Result<(), CapitalError> {
        self.grid.check_same(grid)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(h: HoldingType, x: i32, r: i32) -> RegionTable {
        RegionTable::build(h, SupportLevel::Finite(x), r).unwrap()
    }

    #[test]
    fn canonical_floor() {
        assert_eq!(canonicalize_support(SupportLevel::Unbounded, 9), -10);
        assert_eq!(canonicalize_support(SupportLevel::Finite(-3), 9), -3);
        assert_eq!(canonicalize_support(SupportLevel::Finite(0), 5), 0);
    }

    #[test]
    fn unbounded_floor_matches_deeper_floor() {
        // Brute force: the region restricted to [−(R+1), R]² is the same
        // whether the floor is −(R+1) or −(R+10).
        for h in [HoldingType::A, HoldingType::B] {
            for r in 0..8 {
                let shallow = RegionTable::build(h, SupportLevel::Unbounded, r).unwrap();
                let deep = table(h, -(r + 10), r);
                for p in shallow.grid().points() {
                    for l in Layer::BOTH {
                        assert_eq!(
                            shallow.class(p).unwrap().in_default(l),
                            deep.class(p).unwrap().in_default(l),
                            "{h} R={r} {p} l={l:?}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn worked_points() {
        let a = table(HoldingType::A, -1, 5);
        let c = a.class(CapitalPoint::new(-1, 1)).unwrap();
        assert!(c.in_default(Layer::One) && c.in_default(Layer::Two));
        let c = a.class(CapitalPoint::new(2, 2)).unwrap();
        assert!(!c.in_default(Layer::One) && !c.in_default(Layer::Two));

        let b = table(HoldingType::B, -2, 5);
        assert!(!b.class(CapitalPoint::new(-1, 3)).unwrap().in_default(Layer::One));
        for x in -5..=-1 {
            let b = table(HoldingType::B, x, 5);
            let c = b.class(CapitalPoint::new(-1, 0)).unwrap();
            assert!(c.in_default(Layer::One) && c.in_default(Layer::Two));
        }
    }

    #[test]
    fn membership_clips_below_floor() {
        let a = table(HoldingType::A, -1, 5);
        assert!(a.region_membership(CapitalPoint::new(1, -1), Layer::One));
        let a = table(HoldingType::A, -3, 5);
        assert!(a.region_membership(CapitalPoint::new(5, -4), Layer::Two));
        let b = table(HoldingType::B, -3, 5);
        assert!(!b.region_membership(CapitalPoint::new(1, -2), Layer::One));
    }

    #[test]
    fn distribution_validation() {
        let grid = CapitalGrid::new(-2, 4).unwrap();
        let err = Distribution::new(grid, [(CapitalPoint::new(5, 0), 1.0)]).unwrap_err();
        assert!(matches!(err, CapitalError::AboveCap { .. }));
        let err = Distribution::new(grid, [(CapitalPoint::new(1, 1), 0.7)]).unwrap_err();
        assert!(matches!(err, CapitalError::NotNormalized { .. }));
        let err = Distribution::new(grid, [(CapitalPoint::new(1, 1), -0.5), (CapitalPoint::new(0, 0), 1.5)])
            .unwrap_err();
        assert!(matches!(err, CapitalError::InvalidMass(..)));
        // Below-floor points are clipped and duplicates merge.
        let d = Distribution::new(
            grid,
            [(CapitalPoint::new(-7, 1), 0.25), (CapitalPoint::new(-2, 1), 0.75)],
        )
        .unwrap();
        assert_eq!(d.mass_at(CapitalPoint::new(-2, 1)), 1.0);
    }

    type Distribution = JointCapitalDistribution<f64>;

    #[test]
    fn grid_indexing_round_trips() {
        let g = CapitalGrid::new(-3, 4).unwrap();
        for (i, p) in g.points().enumerate() {
            assert_eq!(g.index(p), Some(i));
        }
        assert_eq!(g.index(CapitalPoint::new(-4, 0)), None);
        assert_eq!(g.len(), 64);
    }

    #[test]
    fn entrance_points_sit_on_the_inner_edge() {
        // Type B, x = −2: (0, 0) is in D_{B,1} and (1, 0) is not.
        let b = table(HoldingType::B, -2, 4);
        assert!(b.class(CapitalPoint::new(0, 0)).unwrap().in_entrance(Layer::One));
        // Deep inside: (−2, −2) has neighbours (−1, −2) and (−2, −1) both in D_{B,1}.
        assert!(!b.class(CapitalPoint::new(-2, -2)).unwrap().in_entrance(Layer::One));
    }
}
