//! The corner process, excursion truncation and the corrected effective walk
//! `Ŝ_n = S_n + Σ_j Δ_j 1{τ_j <= n}`.

use serde::{Deserialize, Serialize};

use crate::effective::EffectiveTrajectory;
use crate::lattice::{embed, BoundingBox, LatticeKind, LatticePoint, PlanePoint};
use crate::prudent::{decompose_excursions, ExcursionRecord, PrudentPath};

/// `γ̂_0 .. γ̂_t`: the corner of the current box nearest to the walker.
#[derive(Clone, Debug, PartialEq)]
pub struct CornerTrace {
    pub kind: LatticeKind,
    /// Corners in lattice coordinates.
    pub sites: Vec<LatticePoint>,
    /// The same corners embedded in the plane.
    pub corners: Vec<PlanePoint>,
}

impl CornerTrace {
    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }
}

pub fn corner_trace(path: &PrudentPath) -> CornerTrace {
    let mut bbox = BoundingBox::point(LatticePoint::ORIGIN);
    let mut sites = Vec::with_capacity(path.sites().len());
    for &p in path.sites() {
        bbox.include(p);
        sites.push(bbox.nearest_corner(p));
    }
    let corners = sites.iter().map(|&c| embed(path.kind(), c)).collect();
    CornerTrace {
        kind: path.kind(),
        sites,
        corners,
    }
}

/// `max_{s <= t} |γ̂_s - γ_s|_2 / t` in the plane (0 at `t = 0`).
pub fn sup_distance(path: &PrudentPath, trace: &CornerTrace, t: usize) -> f64 {
    assert!(t < path.sites().len(), "t = {t} beyond the path");
    if t == 0 {
        return 0.0;
    }
    let kind = path.kind();
    let sup = path.sites()[..=t]
        .iter()
        .zip(&trace.corners)
        .map(|(&p, &c)| embed(kind, p).dist(c))
        .fold(0.0, f64::max);
    sup / t as f64
}

/// Running `max_{s <= t} |γ̂_s - γ_s|_2` for every `t` (not normalized).
pub fn running_sup_distance(path: &PrudentPath, trace: &CornerTrace) -> Vec<f64> {
    let kind = path.kind();
    let mut best = 0.0f64;
    path.sites()
        .iter()
        .zip(&trace.corners)
        .map(|(&p, &c)| {
            best = best.max(embed(kind, p).dist(c));
            best
        })
        .collect()
}

/// Transverse level up to which an excursion is kept.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TruncationCap(pub u64);

impl TruncationCap {
    pub const UNBOUNDED: TruncationCap = TruncationCap(u64::MAX);
}

/// Which coordinate an excursion displaces.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Axis {
    /// Vertical excursions move in `b`.
    B,
    /// Horizontal excursions move in `a`.
    A,
}

impl Axis {
    fn coord(self, p: LatticePoint) -> i64 {
        match self {
            Axis::A => p.a as i64,
            Axis::B => p.b as i64,
        }
    }
}

/// Largest transverse displacement from the first site.
pub fn excursion_span(excursion: &[LatticePoint], axis: Axis) -> u64 {
    let Some(&start) = excursion.first() else { return 0 };
    excursion
        .iter()
        .map(|&p| axis.coord(p).abs_diff(axis.coord(start)))
        .max()
        .unwrap_or(0)
}

/// Longest prefix whose displacement from the first site stays within `cap`.
pub fn truncate_excursion(excursion: &[LatticePoint], axis: Axis, cap: TruncationCap) -> &[LatticePoint] {
    let Some(&start) = excursion.first() else { return excursion };
    let origin = axis.coord(start);
    let end = excursion
        .iter()
        .position(|&p| axis.coord(p).abs_diff(origin) > cap.0)
        .unwrap_or(excursion.len());
    &excursion[..end]
}

/// Running minimum of the levels `H_0, H_1, …` (or `W_0, …`) as caps.
pub fn running_min_caps(levels: &[u64]) -> Vec<TruncationCap> {
    let mut low = u64::MAX;
    levels
        .iter()
        .map(|&h| {
            low = low.min(h);
            TruncationCap(low)
        })
        .collect()
}

/// Sites of the vertical excursion `[T_k, U_k]` and the horizontal one
/// `[U_k, T_{k+1}]` (each starts at its anchor site).
pub fn excursion_sites<'a>(
    path: &'a PrudentPath,
    rec: &ExcursionRecord,
) -> (&'a [LatticePoint], Option<&'a [LatticePoint]>) {
    let sites = path.sites();
    let last = sites.len() - 1;
    let t = rec.t_start.time as usize;
    let u = rec.u.map(|s| s.time as usize);
    let vertical = &sites[t..=u.unwrap_or(last)];
    let horizontal = u.map(|u| &sites[u..=rec.t_end.map(|s| s.time as usize).unwrap_or(last)]);
    (vertical, horizontal)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CouplingReport {
    pub excursions: u64,
    pub altered: u64,
    pub altered_fraction: f64,
    /// Excursions within their cap that truncation nevertheless changed.
    pub identity_violations: u64,
    pub max_span: u64,
}

/// Truncates the vertical and horizontal excursion of every completed record
/// `k` at `caps[k]` (the last cap is reused past the end of `caps`) and counts
/// the excursions that change.
pub fn coupling_equality_check(path: &PrudentPath, caps: &[TruncationCap]) -> CouplingReport {
    let records = decompose_excursions(path);
    let mut report = CouplingReport {
        excursions: 0,
        altered: 0,
        altered_fraction: 0.0,
        identity_violations: 0,
        max_span: 0,
    };
    for rec in records.iter().filter(|r| r.complete) {
        let cap = caps
            .get(rec.k)
            .or(caps.last())
            .copied()
            .unwrap_or(TruncationCap::UNBOUNDED);
        let (vertical, horizontal) = excursion_sites(path, rec);
        let parts = [(vertical, Axis::B), (horizontal.expect("complete record"), Axis::A)];
        for (sites, axis) in parts {
            let span = excursion_span(sites, axis);
            let kept = truncate_excursion(sites, axis, cap);
            report.excursions += 1;
            report.max_span = report.max_span.max(span);
            if kept.len() != sites.len() {
                report.altered += 1;
                if span <= cap.0 {
                    report.identity_violations += 1;
                }
            }
        }
    }
    if report.excursions > 0 {
        report.altered_fraction = report.altered as f64 / report.excursions as f64;
    }
    report
}

/// Stopping times `τ_0 = 0 < τ_1 < …` and overshoots `Δ_1, Δ_2, …`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OvershootLedger {
    pub taus: Vec<u64>,
    /// `deltas[j - 1] = Δ_j`.
    pub deltas: Vec<i64>,
}

impl OvershootLedger {
    /// `Σ_{j >= 1, τ_j <= n} Δ_j`.
    pub fn correction_at(&self, n: u64) -> i64 {
        self.taus[1..]
            .iter()
            .zip(&self.deltas)
            .take_while(|(&t, _)| t <= n)
            .map(|(_, &d)| d)
            .sum()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoupledWalk {
    pub s: EffectiveTrajectory,
    pub s_hat: Vec<i64>,
    pub ledger: OvershootLedger,
}

impl CoupledWalk {
    pub fn len(&self) -> usize {
        self.s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.s.is_empty()
    }
}

/// Single scan: odd stopping times are strict down-crossings of the level
/// `S_{τ_{2k}}`, even ones strict up-crossings of `S_{τ_{2k+1}}`.
pub fn build_coupled_walk(s: EffectiveTrajectory) -> CoupledWalk {
    let mut ledger = OvershootLedger {
        taus: vec![0],
        deltas: Vec::new(),
    };
    let mut s_hat = Vec::with_capacity(s.values.len());
    let mut level = s.values[0];
    let mut going_down = true;
    let mut correction = 0i64;
    s_hat.push(s.values[0]);
    for (n, &v) in s.values.iter().enumerate().skip(1) {
        if going_down && v < level {
            ledger.deltas.push(-1 - (v - level));
        } else if !going_down && v > level {
            ledger.deltas.push(1 - (v - level));
        } else {
            s_hat.push(v + correction);
            continue;
        }
        ledger.taus.push(n as u64);
        correction += ledger.deltas.last().unwrap();
        level = v;
        going_down = !going_down;
        s_hat.push(v + correction);
    }
    CoupledWalk { s, s_hat, ledger }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pts(v: &[(i32, i32)]) -> Vec<LatticePoint> {
        v.iter().map(|&(a, b)| LatticePoint::new(a, b)).collect()
    }

    #[test]
    fn straight_path_is_its_own_corner() {
        let sites: Vec<_> = (0..20).map(|i| LatticePoint::new(i, 0)).collect();
        for kind in [LatticeKind::Square, LatticeKind::Triangular] {
            let path = PrudentPath::from_sites(kind, &sites).unwrap();
            let trace = corner_trace(&path);
            assert_eq!(trace.sites, sites);
            for t in 0..20 {
                assert_eq!(sup_distance(&path, &trace, t), 0.0);
            }
        }
    }

    #[test]
    fn corners_match_brute_force() {
        let sites = pts(&[(0, 0), (0, 1), (0, 2), (1, 2), (1, 1), (1, 0), (1, -1), (2, -1)]);
        let path = PrudentPath::from_sites(LatticeKind::Square, &sites).unwrap();
        let trace = corner_trace(&path);
        assert_eq!(trace.len(), sites.len());
        for (t, &p) in sites.iter().enumerate() {
            let a_lo = sites[..=t].iter().map(|q| q.a).min().unwrap();
            let a_hi = sites[..=t].iter().map(|q| q.a).max().unwrap();
            let b_lo = sites[..=t].iter().map(|q| q.b).min().unwrap();
            let b_hi = sites[..=t].iter().map(|q| q.b).max().unwrap();
            let mut best = None;
            for a in [a_hi, a_lo] {
                for b in [b_hi, b_lo] {
                    let d = (a - p.a).abs() + (b - p.b).abs();
                    if best.map_or(true, |(bd, _)| d < bd) {
                        best = Some((d, LatticePoint::new(a, b)));
                    }
                }
            }
            assert_eq!(trace.sites[t], best.unwrap().1, "t={t}");
        }
        // At t=4 the walker sits mid-edge of the 2x3 box.
        assert_eq!(trace.sites[4], LatticePoint::new(1, 2));
        assert!((sup_distance(&path, &trace, 4) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn truncation_cases() {
        let ex = pts(&[(0, 0), (0, 1), (0, 2), (0, 3), (0, 4), (0, 5), (1, 5)]);
        assert_eq!(excursion_span(&ex, Axis::B), 5);
        assert_eq!(truncate_excursion(&ex, Axis::B, TruncationCap(5)), &ex[..]);
        assert_eq!(truncate_excursion(&ex, Axis::B, TruncationCap(3)), &ex[..4]);
        assert_eq!(truncate_excursion(&ex, Axis::B, TruncationCap(0)), &ex[..1]);
        let flat = pts(&[(0, 0), (1, 0), (2, 0)]);
        assert_eq!(truncate_excursion(&flat, Axis::B, TruncationCap(0)), &flat[..]);
    }

    #[test]
    fn running_min() {
        let caps = running_min_caps(&[3, 5, 2, 4]);
        assert_eq!(caps, vec![TruncationCap(3), TruncationCap(3), TruncationCap(2), TruncationCap(2)]);
    }

    #[test]
    fn overshoot_example() {
        let s = EffectiveTrajectory::from_values(0, vec![0, -3, -3, 1]);
        let c = build_coupled_walk(s);
        assert_eq!(c.ledger.taus, vec![0, 1, 3]);
        assert_eq!(c.ledger.deltas, vec![2, 1 - 4]);
        assert_eq!(c.s_hat, vec![0, -1, -1, 0]);
    }

    #[test]
    fn monotone_walk_has_empty_ledger() {
        let s = EffectiveTrajectory::from_values(0, vec![0, 0, 2, 3, 7]);
        let c = build_coupled_walk(s.clone());
        assert_eq!(c.ledger.taus, vec![0]);
        assert!(c.ledger.deltas.is_empty());
        assert_eq!(c.s_hat, s.values);
    }

    #[test]
    fn coupling_report_on_simulated_path() {
        let path = crate::prudent::simulate(LatticeKind::Square, 5000, 3);
        let wide = coupling_equality_check(&path, &[TruncationCap::UNBOUNDED]);
        assert!(wide.excursions > 0);
        assert_eq!(wide.altered, 0);
        let zero = coupling_equality_check(&path, &[TruncationCap(0)]);
        assert_eq!(zero.identity_violations, 0);
        assert!(zero.altered > 0);
        let tight = coupling_equality_check(&path, &[TruncationCap(wide.max_span)]);
        assert_eq!(tight.altered, 0);
    }
}
