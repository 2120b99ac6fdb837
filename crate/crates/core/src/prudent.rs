//! Kinetic prudent walk: the simulator, the excursion decomposition and the
//! event detectors built on it.
//!
//! A step in direction `d` is prudent when the half-line `{x + k d : k >= 1}`
//! from the current site `x` contains no visited site. The kinetic walk picks
//! uniformly among the prudent steps.
//!
//! Legality is decided in O(1) per direction. For every lattice line through a
//! visited site the walker keeps the smallest and largest visited coordinate
//! along that line; a ray is blocked exactly when the current site is not the
//! extreme visited site on its line in the ray's direction. Lines of one family
//! are indexed contiguously because a nearest-neighbour path moves the line
//! index by at most one per step.

use std::collections::{HashSet, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lattice::{directions, embed, BoundingBox, LatticeKind, LatticePoint, LineFamily, StepDirection};
use crate::rng::CounterRng;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PrudentError {
    #[error("walker trapped at {position} after {time} steps: no prudent step")]
    Trapped { position: LatticePoint, time: u64 },
    #[error("excursion {k} is not complete (decomposition has {available} usable records)")]
    IncompleteExcursion { k: usize, available: usize },
    #[error("invalid path at index {index}: {reason}")]
    InvalidPath { index: usize, reason: String },
}

/// Min/max visited along-coordinate for a contiguous range of line ids.
#[derive(Clone, Debug)]
struct LineExtents {
    first_id: i64,
    spans: VecDeque<(i32, i32)>,
}

impl LineExtents {
    fn new(id: i64, along: i32) -> Self {
        let mut spans = VecDeque::with_capacity(64);
        spans.push_back((along, along));
        Self { first_id: id, spans }
    }

    #[inline]
    fn get(&self, id: i64) -> Option<(i32, i32)> {
        let off = id - self.first_id;
        if off < 0 {
            return None;
        }
        self.spans.get(off as usize).copied()
    }

    #[inline]
    fn insert(&mut self, id: i64, along: i32) {
        let off = id - self.first_id;
        if off < 0 {
            debug_assert_eq!(off, -1, "line ids must grow contiguously");
            self.spans.push_front((along, along));
            self.first_id = id;
        } else if off as usize >= self.spans.len() {
            debug_assert_eq!(off as usize, self.spans.len(), "line ids must grow contiguously");
            self.spans.push_back((along, along));
        } else {
            let span = &mut self.spans[off as usize];
            span.0 = span.0.min(along);
            span.1 = span.1.max(along);
        }
    }
}

#[inline]
fn line_coords(family: LineFamily, p: LatticePoint) -> (i64, i32) {
    match family {
        LineFamily::AlongA => (p.b as i64, p.a),
        LineFamily::AlongB => (p.a as i64, p.b),
        LineFamily::Diagonal => (p.a as i64 + p.b as i64, p.a),
    }
}

fn family_slot(family: LineFamily) -> usize {
    match family {
        LineFamily::AlongA => 0,
        LineFamily::AlongB => 1,
        LineFamily::Diagonal => 2,
    }
}

/// Walker state without the site history. This is what the Monte Carlo
/// harness drives; [`PrudentPath`] wraps it with the full history.
#[derive(Clone, Debug)]
pub struct PrudentWalker {
    kind: LatticeKind,
    position: LatticePoint,
    bbox: BoundingBox,
    time: u64,
    lines: Vec<LineExtents>,
    trapped: bool,
}

impl PrudentWalker {
    pub fn new(kind: LatticeKind) -> Self {
        let o = LatticePoint::ORIGIN;
        let n_families = match kind {
            LatticeKind::Square => 2,
            LatticeKind::Triangular => 3,
        };
        let lines = [LineFamily::AlongA, LineFamily::AlongB, LineFamily::Diagonal][..n_families]
            .iter()
            .map(|&f| {
                let (id, along) = line_coords(f, o);
                LineExtents::new(id, along)
            })
            .collect();
        Self {
            kind,
            position: o,
            bbox: BoundingBox::point(o),
            time: 0,
            lines,
            trapped: false,
        }
    }

    pub fn kind(&self) -> LatticeKind {
        self.kind
    }

    pub fn position(&self) -> LatticePoint {
        self.position
    }

    pub fn bbox(&self) -> BoundingBox {
        self.bbox
    }

    pub fn time(&self) -> u64 {
        self.time
    }

    pub fn width(&self) -> i64 {
        self.bbox.width()
    }

    pub fn height(&self) -> i64 {
        self.bbox.height()
    }

    pub fn is_trapped(&self) -> bool {
        self.trapped
    }

    #[inline]
    pub fn is_legal(&self, d: StepDirection) -> bool {
        let family = d.family();
        let (id, along) = line_coords(family, self.position);
        let (lo, hi) = self.lines[family_slot(family)]
            .get(id)
            .expect("current site is always indexed");
        if d.orientation() > 0 {
            hi == along
        } else {
            lo == along
        }
    }

    /// Writes the prudent directions into `out` and returns how many there are.
    #[inline]
    pub fn legal_into(&self, out: &mut [StepDirection; 6]) -> usize {
        let mut n = 0;
        for &d in directions(self.kind) {
            if self.is_legal(d) {
                out[n] = d;
                n += 1;
            }
        }
        n
    }

    pub fn legal_steps(&self) -> Vec<StepDirection> {
        let mut buf = [directions(self.kind)[0]; 6];
        let n = self.legal_into(&mut buf);
        buf[..n].to_vec()
    }

    /// Moves one site without checking prudence. Callers must pass a legal direction.
    #[inline]
    fn advance(&mut self, d: StepDirection) {
        let p = self.position + d.delta;
        self.position = p;
        self.bbox.include(p);
        self.time += 1;
        for (slot, family) in [LineFamily::AlongA, LineFamily::AlongB, LineFamily::Diagonal]
            .into_iter()
            .enumerate()
            .take(self.lines.len())
        {
            let (id, along) = line_coords(family, p);
            self.lines[slot].insert(id, along);
        }
    }

    /// One kinetic step: uniform among prudent directions.
    #[inline]
    pub fn step(&mut self, rng: &mut CounterRng) -> Result<StepDirection, PrudentError> {
        let mut buf = [directions(self.kind)[0]; 6];
        let n = self.legal_into(&mut buf);
        if n == 0 {
            self.trapped = true;
            return Err(PrudentError::Trapped {
                position: self.position,
                time: self.time,
            });
        }
        let d = buf[rng.below(n as u32) as usize];
        self.advance(d);
        Ok(d)
    }

    /// Takes direction `d` if it is prudent.
    pub fn try_step(&mut self, d: StepDirection) -> Result<(), PrudentError> {
        if !self.is_legal(d) {
            return Err(PrudentError::InvalidPath {
                index: self.time as usize + 1,
                reason: format!("step {} from {} is not prudent", d.delta, self.position),
            });
        }
        self.advance(d);
        Ok(())
    }
}

/// A simulated (or hand-built) prudent path with its full site history.
#[derive(Clone, Debug)]
pub struct PrudentPath {
    walker: PrudentWalker,
    sites: Vec<LatticePoint>,
    visited: HashSet<LatticePoint>,
    seed: u64,
    rng: CounterRng,
}

impl PrudentPath {
    pub fn new(kind: LatticeKind, seed: u64) -> Self {
        Self::with_rng(kind, seed, CounterRng::new(seed))
    }

    pub fn with_rng(kind: LatticeKind, seed: u64, rng: CounterRng) -> Self {
        let mut visited = HashSet::new();
        visited.insert(LatticePoint::ORIGIN);
        Self {
            walker: PrudentWalker::new(kind),
            sites: vec![LatticePoint::ORIGIN],
            visited,
            seed,
            rng,
        }
    }

    /// Builds a path from an explicit site list, checking that it starts at the
    /// origin, moves by lattice steps and that every step is prudent.
    pub fn from_sites(kind: LatticeKind, sites: &[LatticePoint]) -> Result<Self, PrudentError> {
        if sites.first() != Some(&LatticePoint::ORIGIN) {
            return Err(PrudentError::InvalidPath {
                index: 0,
                reason: "path must start at the origin".into(),
            });
        }
        let mut path = Self::new(kind, 0);
        for (i, w) in sites.windows(2).enumerate() {
            let delta = w[1] - w[0];
            let d = directions(kind)
                .iter()
                .copied()
                .find(|d| d.delta == delta)
                .ok_or_else(|| PrudentError::InvalidPath {
                    index: i + 1,
                    reason: format!("{delta} is not a {kind} lattice step"),
                })?;
            path.push(d)?;
        }
        Ok(path)
    }

    fn push(&mut self, d: StepDirection) -> Result<(), PrudentError> {
        self.walker.try_step(d)?;
        let p = self.walker.position();
        self.sites.push(p);
        self.visited.insert(p);
        Ok(())
    }

    pub fn kind(&self) -> LatticeKind {
        self.walker.kind()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn sites(&self) -> &[LatticePoint] {
        &self.sites
    }

    pub fn visited(&self) -> &HashSet<LatticePoint> {
        &self.visited
    }

    /// Number of steps taken.
    pub fn len(&self) -> usize {
        self.sites.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn current(&self) -> LatticePoint {
        self.walker.position()
    }

    pub fn bbox(&self) -> BoundingBox {
        self.walker.bbox()
    }

    pub fn trapped(&self) -> bool {
        self.walker.is_trapped()
    }

    pub fn walker(&self) -> &PrudentWalker {
        &self.walker
    }

    pub fn legal_steps(&self) -> Vec<StepDirection> {
        self.walker.legal_steps()
    }

    /// Legal steps by scanning each ray site by site up to the bounding box,
    /// outside of which nothing has been visited.
    pub fn legal_steps_scan(&self) -> Vec<StepDirection> {
        let bbox = self.bbox();
        let here = self.current();
        directions(self.kind())
            .iter()
            .copied()
            .filter(|d| {
                let mut p = here + d.delta;
                while bbox.contains(p) {
                    if self.visited.contains(&p) {
                        return false;
                    }
                    p = p + d.delta;
                }
                true
            })
            .collect()
    }

    /// One kinetic step using the path's own generator.
    pub fn step(&mut self) -> Result<StepDirection, PrudentError> {
        let d = self.walker.step(&mut self.rng)?;
        let p = self.walker.position();
        self.sites.push(p);
        self.visited.insert(p);
        Ok(d)
    }

    /// Width W_t and height H_t of the bounding box after each step `t = 0..=len`.
    pub fn extents(&self) -> Vec<(i64, i64)> {
        let mut bbox = BoundingBox::point(LatticePoint::ORIGIN);
        self.sites
            .iter()
            .map(|&p| {
                bbox.include(p);
                (bbox.width(), bbox.height())
            })
            .collect()
    }

    /// Bounding box after each step.
    pub fn boxes(&self) -> Vec<BoundingBox> {
        let mut bbox = BoundingBox::point(LatticePoint::ORIGIN);
        self.sites
            .iter()
            .map(|&p| {
                bbox.include(p);
                bbox
            })
            .collect()
    }

    /// Prefix of the first `t` steps, replayed.
    pub fn truncated(&self, t: usize) -> PrudentPath {
        let mut out = PrudentPath::new(self.kind(), self.seed);
        for w in self.sites[..=t.min(self.len())].windows(2) {
            let delta = w[1] - w[0];
            let d = *directions(self.kind()).iter().find(|d| d.delta == delta).unwrap();
            out.push(d).expect("prefix of a prudent path is prudent");
        }
        out
    }
}

/// Runs `n_steps` kinetic steps from the origin (stopping early if trapped).
pub fn simulate(kind: LatticeKind, n_steps: usize, seed: u64) -> PrudentPath {
    simulate_with(kind, n_steps, seed, CounterRng::new(seed))
}

pub fn simulate_with(kind: LatticeKind, n_steps: usize, seed: u64, rng: CounterRng) -> PrudentPath {
    let mut path = PrudentPath::with_rng(kind, seed, rng);
    path.sites.reserve(n_steps);
    for _ in 0..n_steps {
        if path.step().is_err() {
            break;
        }
    }
    path
}

/// Position and box at one of the decomposition's stopping times.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Snapshot {
    pub time: u64,
    pub position: LatticePoint,
    pub bbox: BoundingBox,
}

impl Snapshot {
    pub fn width(&self) -> i64 {
        self.bbox.width()
    }

    pub fn height(&self) -> i64 {
        self.bbox.height()
    }
}

/// One excursion `[T_k, T_{k+1}]`: the part `(T_k, U_k]` ends just before the
/// height grows, the part `(U_k, T_{k+1}]` just before the width grows.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExcursionRecord {
    pub k: usize,
    pub t_start: Snapshot,
    pub u: Option<Snapshot>,
    pub t_end: Option<Snapshot>,
    /// `W_{T_{k+1}} - W_{T_k}` (complete records only, else 0).
    pub x: i64,
    /// `H_{T_{k+1}} - H_{T_k}` (complete records only, else 0).
    pub y: i64,
    /// Largest |b - b_{T_k}| over `(T_k, U_k]`.
    pub vertical_span: i64,
    /// Largest |a - a_{U_k}| over `(U_k, T_{k+1}]`.
    pub horizontal_span: i64,
    pub complete: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Awaiting {
    HeightGrowth,
    WidthGrowth,
}

/// Online excursion decomposition. Feed the walk one site at a time with
/// [`ExcursionTracker::observe`]; finished records are drained with
/// [`ExcursionTracker::take_completed`] or collected by [`ExcursionTracker::finish`].
///
/// A single step can grow width and height at once on the triangular lattice.
/// Each growth of a step closes at most one pending stopping time of its kind,
/// so such a step yields `U_k = T_{k+1}` rather than an unbounded cascade.
#[derive(Clone, Debug)]
pub struct ExcursionTracker {
    awaiting: Awaiting,
    current: ExcursionRecord,
    completed: Vec<ExcursionRecord>,
    last: Option<Snapshot>,
}

impl Default for ExcursionTracker {
    fn default() -> Self {
        Self::new()
    }
}

impl ExcursionTracker {
    pub fn new() -> Self {
        let origin = Snapshot {
            time: 0,
            position: LatticePoint::ORIGIN,
            bbox: BoundingBox::point(LatticePoint::ORIGIN),
        };
        Self {
            awaiting: Awaiting::HeightGrowth,
            current: Self::open(0, origin),
            completed: Vec::new(),
            last: None,
        }
    }

    fn open(k: usize, at: Snapshot) -> ExcursionRecord {
        ExcursionRecord {
            k,
            t_start: at,
            u: None,
            t_end: None,
            x: 0,
            y: 0,
            vertical_span: 0,
            horizontal_span: 0,
            complete: false,
        }
    }

    /// Feed the site at time `time` (starting with the origin at time 0) and the box after it.
    #[inline]
    pub fn observe(&mut self, time: u64, position: LatticePoint, bbox: BoundingBox) {
        let now = Snapshot { time, position, bbox };
        let prev = match self.last.replace(now) {
            None => return,
            Some(p) => p,
        };
        let mut h_grew = bbox.height() > prev.bbox.height();
        let mut w_grew = bbox.width() > prev.bbox.width();
        loop {
            match self.awaiting {
                Awaiting::HeightGrowth if h_grew => {
                    h_grew = false;
                    self.current.u = Some(prev);
                    self.awaiting = Awaiting::WidthGrowth;
                }
                Awaiting::WidthGrowth if w_grew => {
                    w_grew = false;
                    let mut rec = std::mem::replace(&mut self.current, Self::open(0, prev));
                    rec.t_end = Some(prev);
                    rec.x = prev.width() - rec.t_start.width();
                    rec.y = prev.height() - rec.t_start.height();
                    rec.complete = true;
                    self.current.k = rec.k + 1;
                    self.completed.push(rec);
                    self.awaiting = Awaiting::HeightGrowth;
                }
                _ => break,
            }
        }
        match self.awaiting {
            Awaiting::HeightGrowth => {
                let db = (position.b as i64 - self.current.t_start.position.b as i64).abs();
                self.current.vertical_span = self.current.vertical_span.max(db);
            }
            Awaiting::WidthGrowth => {
                let u = self.current.u.expect("u is set while awaiting width growth");
                let da = (position.a as i64 - u.position.a as i64).abs();
                self.current.horizontal_span = self.current.horizontal_span.max(da);
            }
        }
    }

    pub fn completed(&self) -> &[ExcursionRecord] {
        &self.completed
    }

    pub fn take_completed(&mut self) -> Vec<ExcursionRecord> {
        std::mem::take(&mut self.completed)
    }

    /// Index of the excursion currently in progress.
    pub fn current_k(&self) -> usize {
        self.current.k
    }

    /// The excursion in progress (`complete == false`).
    pub fn partial(&self) -> &ExcursionRecord {
        &self.current
    }

    /// All completed records followed by the partial one.
    pub fn finish(mut self) -> Vec<ExcursionRecord> {
        let mut out = std::mem::take(&mut self.completed);
        if self.last.is_some() {
            out.push(self.current);
        }
        out
    }
}

/// Excursion records of a path; the last one is the partial excursion.
pub fn decompose_excursions(path: &PrudentPath) -> Vec<ExcursionRecord> {
    let mut tracker = ExcursionTracker::new();
    let mut bbox = BoundingBox::point(LatticePoint::ORIGIN);
    for (t, &p) in path.sites().iter().enumerate() {
        bbox.include(p);
        tracker.observe(t as u64, p, bbox);
    }
    tracker.finish()
}

/// Outcome of [`drive_excursions`].
#[derive(Clone, Debug, PartialEq)]
pub struct ExcursionRun {
    pub completed: Vec<ExcursionRecord>,
    pub partial: ExcursionRecord,
    pub steps: u64,
    pub trapped: bool,
    /// `true` when `done` returned `true` before the step budget ran out.
    pub stopped: bool,
}

/// Runs a kinetic walk without storing its sites, feeding the decomposition
/// after every step, until `done` holds, the walker is trapped or `max_steps`
/// steps have been taken.
pub fn drive_excursions<F>(kind: LatticeKind, max_steps: u64, rng: &mut CounterRng, mut done: F) -> ExcursionRun
where
    F: FnMut(&ExcursionTracker) -> bool,
{
    let mut walker = PrudentWalker::new(kind);
    let mut tracker = ExcursionTracker::new();
    tracker.observe(0, walker.position(), walker.bbox());
    let mut trapped = false;
    let mut stopped = done(&tracker);
    while !stopped && walker.time() < max_steps {
        if walker.step(rng).is_err() {
            trapped = true;
            break;
        }
        tracker.observe(walker.time(), walker.position(), walker.bbox());
        stopped = done(&tracker);
    }
    let partial = tracker.partial().clone();
    ExcursionRun {
        completed: tracker.take_completed(),
        partial,
        steps: walker.time(),
        trapped,
        stopped,
    }
}

/// The crossing event A_k on a record with a known `U_k`: the walker sits on a
/// corner of box(T_k) at T_k and on the corner of box(U_k) with the same `a`
/// side and the opposite `b` side at U_k.
pub fn crossing_event_record(rec: &ExcursionRecord) -> Option<bool> {
    let u = rec.u?;
    let t = rec.t_start;
    if u.bbox.b_min == u.bbox.b_max {
        return Some(false);
    }
    let side_a = |bx: &BoundingBox, max: bool| if max { bx.a_max } else { bx.a_min };
    let side_b = |bx: &BoundingBox, max: bool| if max { bx.b_max } else { bx.b_min };
    for a_hi in [false, true] {
        for b_hi in [false, true] {
            let start = LatticePoint::new(side_a(&t.bbox, a_hi), side_b(&t.bbox, b_hi));
            let end = LatticePoint::new(side_a(&u.bbox, a_hi), side_b(&u.bbox, !b_hi));
            if t.position == start && u.position == end {
                return Some(true);
            }
        }
    }
    Some(false)
}

pub fn crossing_event(path: &PrudentPath, k: usize) -> Result<bool, PrudentError> {
    let records = decompose_excursions(path);
    let available = records.iter().filter(|r| r.u.is_some()).count();
    records
        .get(k)
        .and_then(crossing_event_record)
        .ok_or(PrudentError::IncompleteExcursion { k, available })
}

/// Q_1: the embedded end point lies in the closed first quadrant.
pub fn quadrant_event_at(kind: LatticeKind, p: LatticePoint) -> bool {
    let e = embed(kind, p);
    e.x >= 0.0 && e.y >= 0.0
}

pub fn quadrant_event(path: &PrudentPath) -> bool {
    quadrant_event_at(path.kind(), path.current())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pts(v: &[(i32, i32)]) -> Vec<LatticePoint> {
        v.iter().map(|&(a, b)| LatticePoint::new(a, b)).collect()
    }

    fn deltas(v: &[StepDirection]) -> Vec<(i32, i32)> {
        let mut out: Vec<_> = v.iter().map(|d| (d.delta.a, d.delta.b)).collect();
        out.sort();
        out
    }

    #[test]
    fn all_directions_legal_at_start() {
        for kind in [LatticeKind::Square, LatticeKind::Triangular] {
            let path = PrudentPath::new(kind, 1);
            assert_eq!(path.legal_steps().len(), kind.degree());
        }
    }

    #[test]
    fn one_step_blocks_only_the_way_back() {
        for kind in [LatticeKind::Square, LatticeKind::Triangular] {
            for &d in directions(kind) {
                let path = PrudentPath::from_sites(kind, &[LatticePoint::ORIGIN, d.delta]).unwrap();
                let legal = path.legal_steps();
                assert_eq!(legal.len(), kind.degree() - 1);
                assert!(!legal.iter().any(|l| l.delta == -d.delta));
            }
        }
    }

    #[test]
    fn square_l_shape_legal_set() {
        // (0,0) -> (1,0) -> (1,1): south hits (1,0); west sees (0,1)? not visited, so legal.
        let path = PrudentPath::from_sites(LatticeKind::Square, &pts(&[(0, 0), (1, 0), (1, 1)])).unwrap();
        assert_eq!(deltas(&path.legal_steps()), vec![(-1, 0), (0, 1), (1, 0)]);
        assert_eq!(deltas(&path.legal_steps_scan()), vec![(-1, 0), (0, 1), (1, 0)]);
    }

    #[test]
    fn from_sites_rejects_imprudent_and_non_steps() {
        let err = PrudentPath::from_sites(LatticeKind::Square, &pts(&[(0, 0), (2, 0)])).unwrap_err();
        assert!(matches!(err, PrudentError::InvalidPath { index: 1, .. }));
        // Heading south from (0,2) looks straight at the origin.
        let err = PrudentPath::from_sites(
            LatticeKind::Square,
            &pts(&[(0, 0), (1, 0), (1, 1), (1, 2), (0, 2), (0, 1)]),
        )
        .unwrap_err();
        assert!(matches!(err, PrudentError::InvalidPath { index: 5, .. }));
        assert!(PrudentPath::from_sites(LatticeKind::Square, &pts(&[(1, 0)])).is_err());
    }

    #[test]
    fn seeded_first_step_is_deterministic() {
        for kind in [LatticeKind::Square, LatticeKind::Triangular] {
            let a = simulate(kind, 1, 99);
            let b = simulate(kind, 1, 99);
            assert_eq!(a.sites(), b.sites());
        }
    }

    #[test]
    fn zero_steps_is_the_origin() {
        let p = simulate(LatticeKind::Triangular, 0, 3);
        assert_eq!(p.sites(), &[LatticePoint::ORIGIN]);
        assert!(!p.trapped());
    }

    #[test]
    fn long_walk_is_self_avoiding() {
        for kind in [LatticeKind::Square, LatticeKind::Triangular] {
            let p = simulate(kind, 10_000, 5);
            assert_eq!(p.visited().len(), p.sites().len());
        }
    }

    #[test]
    fn decomposition_of_hand_built_square_path() {
        // Steps: N, E, E, N, W, N.
        let sites = pts(&[(0, 0), (0, 1), (1, 1), (2, 1), (2, 2), (1, 2), (1, 3)]);
        let path = PrudentPath::from_sites(LatticeKind::Square, &sites).unwrap();
        // W_t: 1 1 2 3 3 3 3 ; H_t: 1 2 2 2 3 3 4
        assert_eq!(
            path.extents(),
            vec![(1, 1), (1, 2), (2, 2), (3, 2), (3, 3), (3, 3), (3, 4)]
        );
        let recs = decompose_excursions(&path);
        // U_0 = 1 - 1 = 0, T_1 = 2 - 1 = 1, U_1 = 4 - 1 = 3, then no width growth.
        assert_eq!(recs.len(), 2);
        assert_eq!(recs[0].t_start.time, 0);
        assert_eq!(recs[0].u.unwrap().time, 0);
        assert_eq!(recs[0].t_end.unwrap().time, 1);
        assert_eq!(recs[0].x, 0);
        assert_eq!(recs[0].y, 1);
        assert!(recs[0].complete);
        assert_eq!(recs[1].t_start.time, 1);
        assert_eq!(recs[1].u.unwrap().time, 3);
        assert!(!recs[1].complete);
        // (T_1, U_1] covers t = 2, 3 at b = 1: no vertical displacement.
        assert_eq!(recs[1].vertical_span, 0);
        // (U_1, end] covers a = 2, 2, 1 relative to a(U_1) = 2.
        assert_eq!(recs[1].horizontal_span, 1);
    }

    #[test]
    fn crossing_event_on_one_step_paths_is_false() {
        let p = PrudentPath::from_sites(LatticeKind::Square, &pts(&[(0, 0), (0, 1)])).unwrap();
        assert_eq!(crossing_event(&p, 0), Ok(false));
        let p = PrudentPath::from_sites(LatticeKind::Square, &pts(&[(0, 0), (1, 0)])).unwrap();
        assert!(matches!(crossing_event(&p, 0), Err(PrudentError::IncompleteExcursion { .. })));
    }

    #[test]
    fn crossing_event_on_a_full_height_traverse() {
        // Build a 3-tall column, then step east at the top (T_1), walk down the
        // new column to the bottom corner and step south out of the box.
        let sites = pts(&[(0, 0), (0, 1), (0, 2), (1, 2), (1, 1), (1, 0), (1, -1)]);
        let path = PrudentPath::from_sites(LatticeKind::Square, &sites).unwrap();
        let recs = decompose_excursions(&path);
        // H grows at t=1 -> U_0 = 0, W grows at t=3 -> T_1 = 2, H grows at t=6 -> U_1 = 5.
        assert_eq!(recs[1].t_start.time, 2);
        assert_eq!(recs[1].u.unwrap().time, 5);
        assert_eq!(recs[1].t_start.position, LatticePoint::new(0, 2));
        assert_eq!(recs[1].u.unwrap().position, LatticePoint::new(1, 0));
        assert_eq!(crossing_event(&path, 1), Ok(true));
        // Leaving through the top instead is not a crossing.
        let sites = pts(&[(0, 0), (0, 1), (0, 2), (1, 2), (1, 3)]);
        let path = PrudentPath::from_sites(LatticeKind::Square, &sites).unwrap();
        assert_eq!(crossing_event(&path, 1), Ok(false));
        assert!(crossing_event(&path, 5).is_err());
    }

    #[test]
    fn quadrant_event_conventions() {
        let p = PrudentPath::new(LatticeKind::Square, 0);
        assert!(quadrant_event(&p));
        assert!(!quadrant_event_at(LatticeKind::Square, LatticePoint::new(3, -1)));
        // (1,0) on the triangular lattice embeds at 30 degrees.
        assert!(quadrant_event_at(LatticeKind::Triangular, LatticePoint::new(1, 0)));
        assert!(!quadrant_event_at(LatticeKind::Triangular, LatticePoint::new(0, 1)));
    }
}
