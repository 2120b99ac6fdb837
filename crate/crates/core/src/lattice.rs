//! Lattice geometry in integer axial coordinates.
//!
//! Both lattices use a two-integer chart `(a, b)`. On the square lattice the
//! chart is the identity. On the triangular lattice `(a, b)` are coordinates
//! along the basis vectors `e1 = (√3/2, 1/2)` and `e2 = (√3/2, -1/2)`, and the
//! six unit steps are `±e1`, `±e2`, `±(e1 - e2)`.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LatticeKind {
    Square,
    #[serde(alias = "tri")]
    Triangular,
}

impl LatticeKind {
    /// Number of unit steps (coordination number).
    pub fn degree(self) -> usize {
        match self {
            LatticeKind::Square => 4,
            LatticeKind::Triangular => 6,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            LatticeKind::Square => "square",
            LatticeKind::Triangular => "tri",
        }
    }
}

impl fmt::Display for LatticeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for LatticeKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "square" => Ok(LatticeKind::Square),
            "tri" | "triangular" => Ok(LatticeKind::Triangular),
            other => Err(format!("unknown lattice `{other}` (expected square or tri)")),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LatticePoint {
    pub a: i32,
    pub b: i32,
}

impl LatticePoint {
    pub const ORIGIN: LatticePoint = LatticePoint { a: 0, b: 0 };

    pub const fn new(a: i32, b: i32) -> Self {
        Self { a, b }
    }

    pub fn l1_norm(self) -> i64 {
        (self.a as i64).abs() + (self.b as i64).abs()
    }
}

impl Add for LatticePoint {
    type Output = LatticePoint;
    fn add(self, rhs: Self) -> Self {
        LatticePoint::new(self.a + rhs.a, self.b + rhs.b)
    }
}

impl Sub for LatticePoint {
    type Output = LatticePoint;
    fn sub(self, rhs: Self) -> Self {
        LatticePoint::new(self.a - rhs.a, self.b - rhs.b)
    }
}

impl Neg for LatticePoint {
    type Output = LatticePoint;
    fn neg(self) -> Self {
        LatticePoint::new(-self.a, -self.b)
    }
}

impl Mul<i32> for LatticePoint {
    type Output = LatticePoint;
    fn mul(self, k: i32) -> Self {
        LatticePoint::new(self.a * k, self.b * k)
    }
}

impl fmt::Display for LatticePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.a, self.b)
    }
}

/// A point of the Euclidean plane, in lattice-spacing units.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PlanePoint {
    pub x: f64,
    pub y: f64,
}

impl PlanePoint {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn dist(self, other: PlanePoint) -> f64 {
        (self - other).norm()
    }

    pub fn scale(self, s: f64) -> Self {
        PlanePoint::new(self.x * s, self.y * s)
    }
}

impl Add for PlanePoint {
    type Output = PlanePoint;
    fn add(self, rhs: Self) -> Self {
        PlanePoint::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl Sub for PlanePoint {
    type Output = PlanePoint;
    fn sub(self, rhs: Self) -> Self {
        PlanePoint::new(self.x - rhs.x, self.y - rhs.y)
    }
}

/// Which family of lattice lines a step runs along.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum LineFamily {
    /// `b` constant, moving in `a`.
    AlongA,
    /// `a` constant, moving in `b`.
    AlongB,
    /// `a + b` constant, moving in `a` (triangular only).
    Diagonal,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct StepDirection {
    pub index: u8,
    pub delta: LatticePoint,
}

impl StepDirection {
    const fn new(index: u8, a: i32, b: i32) -> Self {
        Self {
            index,
            delta: LatticePoint::new(a, b),
        }
    }

    pub fn family(self) -> LineFamily {
        match (self.delta.a, self.delta.b) {
            (_, 0) => LineFamily::AlongA,
            (0, _) => LineFamily::AlongB,
            _ => LineFamily::Diagonal,
        }
    }

    /// +1 if the step increases the along-line coordinate of its family, -1 otherwise.
    pub fn orientation(self) -> i32 {
        match self.family() {
            LineFamily::AlongA | LineFamily::Diagonal => self.delta.a.signum(),
            LineFamily::AlongB => self.delta.b.signum(),
        }
    }
}

/// Square steps: east, west, north, south.
const SQUARE: [StepDirection; 4] = [
    StepDirection::new(0, 1, 0),
    StepDirection::new(1, -1, 0),
    StepDirection::new(2, 0, 1),
    StepDirection::new(3, 0, -1),
];

/// Triangular steps counter-clockwise from `e1` (30°): e1, e1-e2 (90°), -e2 (150°),
/// -e1 (210°), e2-e1 (270°), e2 (330°).
const TRIANGULAR: [StepDirection; 6] = [
    StepDirection::new(0, 1, 0),
    StepDirection::new(1, 1, -1),
    StepDirection::new(2, 0, -1),
    StepDirection::new(3, -1, 0),
    StepDirection::new(4, -1, 1),
    StepDirection::new(5, 0, 1),
];

pub fn directions(kind: LatticeKind) -> &'static [StepDirection] {
    match kind {
        LatticeKind::Square => &SQUARE,
        LatticeKind::Triangular => &TRIANGULAR,
    }
}

/// The direction whose delta is `-d.delta`.
pub fn opposite(kind: LatticeKind, d: StepDirection) -> StepDirection {
    let dirs = directions(kind);
    match kind {
        LatticeKind::Square => dirs[(d.index ^ 1) as usize],
        LatticeKind::Triangular => dirs[((d.index + 3) % 6) as usize],
    }
}

const HALF_SQRT3: f64 = 0.866_025_403_784_438_6;

pub fn embed(kind: LatticeKind, p: LatticePoint) -> PlanePoint {
    let (a, b) = (p.a as f64, p.b as f64);
    match kind {
        LatticeKind::Square => PlanePoint::new(a, b),
        LatticeKind::Triangular => PlanePoint::new(HALF_SQRT3 * (a + b), 0.5 * (a - b)),
    }
}

/// `origin + k * d.delta` for `k = 1..=n`.
pub fn ray_sites(origin: LatticePoint, d: StepDirection, n: usize) -> Vec<LatticePoint> {
    (1..=n as i32).map(|k| origin + d.delta * k).collect()
}

/// Axis-aligned box in the axial chart.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BoundingBox {
    pub a_min: i32,
    pub a_max: i32,
    pub b_min: i32,
    pub b_max: i32,
}

impl BoundingBox {
    pub fn point(p: LatticePoint) -> Self {
        Self {
            a_min: p.a,
            a_max: p.a,
            b_min: p.b,
            b_max: p.b,
        }
    }

    pub fn include(&mut self, p: LatticePoint) {
        self.a_min = self.a_min.min(p.a);
        self.a_max = self.a_max.max(p.a);
        self.b_min = self.b_min.min(p.b);
        self.b_max = self.b_max.max(p.b);
    }

    pub fn contains(&self, p: LatticePoint) -> bool {
        (self.a_min..=self.a_max).contains(&p.a) && (self.b_min..=self.b_max).contains(&p.b)
    }

    pub fn width(&self) -> i64 {
        self.a_max as i64 - self.a_min as i64 + 1
    }

    pub fn height(&self) -> i64 {
        self.b_max as i64 - self.b_min as i64 + 1
    }

    /// Corners in the order (a_max, b_max), (a_max, b_min), (a_min, b_max), (a_min, b_min).
    pub fn corners(&self) -> [LatticePoint; 4] {
        [
            LatticePoint::new(self.a_max, self.b_max),
            LatticePoint::new(self.a_max, self.b_min),
            LatticePoint::new(self.a_min, self.b_max),
            LatticePoint::new(self.a_min, self.b_min),
        ]
    }

    pub fn is_corner(&self, p: LatticePoint) -> bool {
        (p.a == self.a_min || p.a == self.a_max) && (p.b == self.b_min || p.b == self.b_max)
    }

    /// Corner nearest to `p` in the axial L1 metric; ties go to the larger `a`, then the larger `b`.
    pub fn nearest_corner(&self, p: LatticePoint) -> LatticePoint {
        let a = if (self.a_max as i64 - p.a as i64).abs() <= (p.a as i64 - self.a_min as i64).abs() {
            self.a_max
        } else {
            self.a_min
        };
        let b = if (self.b_max as i64 - p.b as i64).abs() <= (p.b as i64 - self.b_min as i64).abs() {
            self.b_max
        } else {
            self.b_min
        };
        LatticePoint::new(a, b)
    }
}
