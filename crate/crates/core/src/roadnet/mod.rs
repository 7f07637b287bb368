//! Road network: sampled lane centerlines with per-arc-length marking
//! segments, plus projection and marking queries.

mod builtin;
mod file;

pub use builtin::{
    build_builtin_map, ramp_merge_region, BUILTIN_MAPS, LANE_WIDTH, TOWN_MARKING_LOSS_AHEAD,
    TOWN_START_A_S,
};
pub use file::{load_network, network_from_str, network_to_string, FILE_VERSION};

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::Vec2;

/// Coverage and ordering tolerance for marking segment bounds, in meters.
const COVERAGE_EPS: f64 = 1e-6;

#[derive(Debug, Error, PartialEq)]
pub enum RoadError {
    #[error("unknown map `{name}`; valid names: {}", valid.join(", "))]
    UnknownMap { name: String, valid: Vec<String> },
    #[error("lane {lane}: {reason}")]
    InvalidLane { lane: LaneId, reason: String },
    #[error("invalid road network: {0}")]
    InvalidNetwork(String),
    #[error("unsupported road network file version {0}")]
    UnsupportedVersion(u32),
    #[error("road network file: {0}")]
    Format(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LaneId(pub u32);

impl fmt::Display for LaneId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MarkingKind {
    Solid,
    Dashed,
    None,
}

impl MarkingKind {
    pub fn as_str(self) -> &'static str {
        match self {
            MarkingKind::Solid => "solid",
            MarkingKind::Dashed => "dashed",
            MarkingKind::None => "none",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarkingSegment {
    pub s_start: f64,
    pub s_end: f64,
    pub kind: MarkingKind,
    pub quality: f64,
}

impl MarkingSegment {
    pub fn new(s_start: f64, s_end: f64, kind: MarkingKind, quality: f64) -> Self {
        Self {
            s_start,
            s_end,
            kind,
            quality,
        }
    }
}

/// Nearest-segment projection of a point onto a lane centerline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaneProjection {
    /// Arc length along the centerline, in `[0, length]`.
    pub s: f64,
    /// Signed lateral offset, positive to the left of travel direction.
    pub d: f64,
    pub segment: usize,
}

/// One lane: a polyline centerline with width and left/right marking
/// segments. Cumulative arc lengths are cached at construction.
#[derive(Debug, Clone, PartialEq)]
pub struct LaneSpec {
    id: LaneId,
    centerline: Vec<Vec2>,
    cum_s: Vec<f64>,
    width: f64,
    left_marking: Vec<MarkingSegment>,
    right_marking: Vec<MarkingSegment>,
    successor: Option<LaneId>,
    is_merge_lane: bool,
    merge_end_s: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct LaneBuilder {
    pub id: LaneId,
    pub centerline: Vec<Vec2>,
    pub width: f64,
    pub left_marking: Vec<MarkingSegment>,
    pub right_marking: Vec<MarkingSegment>,
    pub successor: Option<LaneId>,
    pub is_merge_lane: bool,
    pub merge_end_s: Option<f64>,
}

impl LaneBuilder {
    pub fn build(self) -> Result<LaneSpec, RoadError> {
        LaneSpec::new(self)
    }
}

impl LaneSpec {
    pub fn new(b: LaneBuilder) -> Result<Self, RoadError> {
        let invalid = |reason: String| RoadError::InvalidLane { lane: b.id, reason };
        if b.centerline.len() < 2 {
            return Err(invalid("centerline needs at least 2 points".into()));
        }
        if !(b.width > 0.0) || !b.width.is_finite() {
            return Err(invalid(format!("width must be positive, got {}", b.width)));
        }
        let mut cum_s = Vec::with_capacity(b.centerline.len());
        cum_s.push(0.0);
        for w in b.centerline.windows(2) {
            if !(w[0].x.is_finite()
                && w[0].y.is_finite()
                && w[1].x.is_finite()
                && w[1].y.is_finite())
            {
                return Err(invalid("non-finite centerline point".into()));
            }
            let len = w[0].distance(w[1]);
            if !(len > 0.0) {
                return Err(invalid(
                    "consecutive centerline points must be distinct".into(),
                ));
            }
            let last = *cum_s.last().unwrap();
            cum_s.push(last + len);
        }
        let length = *cum_s.last().unwrap();
        for (side, segs) in [("left", &b.left_marking), ("right", &b.right_marking)] {
            check_marking_cover(segs, length)
                .map_err(|e| invalid(format!("{side} marking: {e}")))?;
        }
        if let Some(end) = b.merge_end_s {
            if !(0.0..=length + COVERAGE_EPS).contains(&end) {
                return Err(invalid(format!(
                    "merge_end_s {end} outside lane length {length}"
                )));
            }
        }
        if b.is_merge_lane && b.merge_end_s.is_none() {
            return Err(invalid("merge lane requires merge_end_s".into()));
        }
        Ok(Self {
            id: b.id,
            centerline: b.centerline,
            cum_s,
            width: b.width,
            left_marking: b.left_marking,
            right_marking: b.right_marking,
            successor: b.successor,
            is_merge_lane: b.is_merge_lane,
            merge_end_s: b.merge_end_s,
        })
    }

    pub fn id(&self) -> LaneId {
        self.id
    }

    pub fn centerline(&self) -> &[Vec2] {
        &self.centerline
    }

    pub fn width(&self) -> f64 {
        self.width
    }

    pub fn successor(&self) -> Option<LaneId> {
        self.successor
    }

    pub fn is_merge_lane(&self) -> bool {
        self.is_merge_lane
    }

    pub fn merge_end_s(&self) -> Option<f64> {
        self.merge_end_s
    }

    pub fn length(&self) -> f64 {
        *self.cum_s.last().unwrap()
    }

    pub fn markings(&self, side: Side) -> &[MarkingSegment] {
        match side {
            Side::Left => &self.left_marking,
            Side::Right => &self.right_marking,
        }
    }

    /// Largest gap between consecutive centerline samples.
    pub fn max_spacing(&self) -> f64 {
        self.cum_s
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(0.0, f64::max)
    }

    fn segment_index(&self, s: f64) -> usize {
        // index i such that cum_s[i] <= s < cum_s[i+1], clamped to the last segment
        let n = self.cum_s.len();
        match self.cum_s.binary_search_by(|v| v.total_cmp(&s)) {
            Ok(i) => i.min(n - 2),
            Err(i) => i.saturating_sub(1).min(n - 2),
        }
    }

    pub fn point_at(&self, s: f64) -> Vec2 {
        let s = s.clamp(0.0, self.length());
        let i = self.segment_index(s);
        let (a, b) = (self.centerline[i], self.centerline[i + 1]);
        let t = (s - self.cum_s[i]) / (self.cum_s[i + 1] - self.cum_s[i]);
        a + (b - a) * t
    }

    pub fn heading_at(&self, s: f64) -> f64 {
        let s = s.clamp(0.0, self.length());
        let i = self.segment_index(s);
        (self.centerline[i + 1] - self.centerline[i]).angle()
    }

    /// Point at arc length `s` shifted `d` meters to the left.
    pub fn offset_point(&self, s: f64, d: f64) -> Vec2 {
        self.point_at(s) + Vec2::from_angle(self.heading_at(s)).perp() * d
    }

    /// Projects `p` onto the nearest centerline segment. Points beyond the
    /// ends clamp to the endpoints.
    pub fn project(&self, p: Vec2) -> LaneProjection {
        let mut best = LaneProjection {
            s: 0.0,
            d: 0.0,
            segment: 0,
        };
        let mut best_dist = f64::INFINITY;
        for (i, w) in self.centerline.windows(2).enumerate() {
            let (a, b) = (w[0], w[1]);
            let ab = b - a;
            let seg_len = self.cum_s[i + 1] - self.cum_s[i];
            let t = ((p - a).dot(ab) / (seg_len * seg_len)).clamp(0.0, 1.0);
            let foot = a + ab * t;
            let dist = p.distance(foot);
            if dist < best_dist {
                best_dist = dist;
                let sign = if ab.cross(p - a) < 0.0 { -1.0 } else { 1.0 };
                best = LaneProjection {
                    s: self.cum_s[i] + t * seg_len,
                    d: sign * dist,
                    segment: i,
                };
            }
        }
        best
    }

    /// Marking segment covering `s` on the given side.
    pub fn marking_at(&self, side: Side, s: f64) -> &MarkingSegment {
        let segs = self.markings(side);
        let s = s.clamp(0.0, self.length());
        segs.iter()
            .find(|m| s >= m.s_start && s < m.s_end)
            .unwrap_or_else(|| segs.last().unwrap())
    }

    /// Length-weighted mean marking quality over `[s_from, s_to]`, clamped to
    /// the lane. A window that degenerates after clamping yields the quality
    /// at the single remaining point.
    pub fn marking_quality(&self, side: Side, s_from: f64, s_to: f64) -> f64 {
        let len = self.length();
        let a = s_from.clamp(0.0, len);
        let b = s_to.clamp(0.0, len);
        if b - a <= 0.0 {
            return self.marking_at(side, a).quality;
        }
        let (sum, _) = weighted_quality(self.markings(side), a, b);
        sum / (b - a)
    }
}

/// Returns (Σ quality·overlap, Σ overlap) over `[a, b]`.
fn weighted_quality(segs: &[MarkingSegment], a: f64, b: f64) -> (f64, f64) {
    segs.iter().fold((0.0, 0.0), |(sum, total), m| {
        let overlap = (m.s_end.min(b) - m.s_start.max(a)).max(0.0);
        (sum + m.quality * overlap, total + overlap)
    })
}

fn check_marking_cover(segs: &[MarkingSegment], length: f64) -> Result<(), String> {
    let first = segs.first().ok_or("no segments")?;
    if first.s_start.abs() > COVERAGE_EPS {
        return Err(format!(
            "first segment starts at {} instead of 0",
            first.s_start
        ));
    }
    for (i, m) in segs.iter().enumerate() {
        if !(m.s_start < m.s_end) {
            return Err(format!("segment {i} has s_start >= s_end"));
        }
        if !(0.0..=1.0).contains(&m.quality) {
            return Err(format!("segment {i} quality {} outside [0,1]", m.quality));
        }
        if m.kind == MarkingKind::None && m.quality != 0.0 {
            return Err(format!(
                "segment {i} has kind none but quality {}",
                m.quality
            ));
        }
        if let Some(next) = segs.get(i + 1) {
            if (next.s_start - m.s_end).abs() > COVERAGE_EPS {
                return Err(format!("gap or overlap between segments {i} and {}", i + 1));
            }
        }
    }
    let last = segs.last().unwrap();
    if (last.s_end - length).abs() > COVERAGE_EPS {
        return Err(format!(
            "segments end at {} but lane length is {length}",
            last.s_end
        ));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Adjacency {
    pub left: Option<LaneId>,
    pub right: Option<LaneId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpawnPoint {
    pub name: String,
    pub lane: LaneId,
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl SpawnPoint {
    pub fn position(&self) -> Vec2 {
        Vec2::new(self.x, self.y)
    }
}

/// Lane assignment of a point: lane id plus its projection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LaneRef {
    pub lane: LaneId,
    pub s: f64,
    pub d: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoadNetwork {
    name: String,
    lanes: Vec<LaneSpec>,
    adjacency: Vec<Adjacency>,
    spawn_points: Vec<SpawnPoint>,
}

impl RoadNetwork {
    /// Builds and validates a network. `adjacency[i]` belongs to `lanes[i]`.
    pub fn new(
        name: impl Into<String>,
        lanes: Vec<LaneSpec>,
        adjacency: Vec<Adjacency>,
        spawn_points: Vec<SpawnPoint>,
    ) -> Result<Self, RoadError> {
        let net = Self {
            name: name.into(),
            lanes,
            adjacency,
            spawn_points,
        };
        net.validate()?;
        Ok(net)
    }

    /// Checks id uniqueness and that every referenced id resolves.
    pub fn validate(&self) -> Result<(), RoadError> {
        let bad = |m: String| Err(RoadError::InvalidNetwork(m));
        if self.lanes.is_empty() {
            return bad("network has no lanes".into());
        }
        if self.adjacency.len() != self.lanes.len() {
            return bad("adjacency table length differs from lane count".into());
        }
        for (i, lane) in self.lanes.iter().enumerate() {
            if self.lanes[..i].iter().any(|l| l.id == lane.id) {
                return bad(format!("duplicate lane id {}", lane.id));
            }
        }
        for (lane, adj) in self.lanes.iter().zip(&self.adjacency) {
            for (what, id) in [
                ("successor", lane.successor),
                ("left neighbor", adj.left),
                ("right neighbor", adj.right),
            ] {
                if let Some(id) = id {
                    if self.lane(id).is_none() {
                        return bad(format!("lane {}: {what} {id} does not exist", lane.id));
                    }
                }
            }
        }
        for (i, sp) in self.spawn_points.iter().enumerate() {
            if self.spawn_points[..i].iter().any(|o| o.name == sp.name) {
                return bad(format!("duplicate spawn point `{}`", sp.name));
            }
            if self.lane(sp.lane).is_none() {
                return bad(format!(
                    "spawn point `{}` references missing lane {}",
                    sp.name, sp.lane
                ));
            }
        }
        Ok(())
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn lanes(&self) -> &[LaneSpec] {
        &self.lanes
    }

    pub fn spawn_points(&self) -> &[SpawnPoint] {
        &self.spawn_points
    }

    pub fn lane(&self, id: LaneId) -> Option<&LaneSpec> {
        self.lanes.iter().find(|l| l.id == id)
    }

    pub fn spawn(&self, name: &str) -> Option<&SpawnPoint> {
        self.spawn_points.iter().find(|s| s.name == name)
    }

    pub fn adjacency(&self, id: LaneId) -> Adjacency {
        self.lanes
            .iter()
            .position(|l| l.id == id)
            .map(|i| self.adjacency[i])
            .unwrap_or_default()
    }

    pub fn neighbor(&self, id: LaneId, side: Side) -> Option<LaneId> {
        let adj = self.adjacency(id);
        match side {
            Side::Left => adj.left,
            Side::Right => adj.right,
        }
    }

    /// Marking kind that a crossing from `lane` towards `side` at `s` would cross.
    pub fn crossing_kind(&self, lane: LaneId, side: Side, s: f64) -> Option<MarkingKind> {
        self.lane(lane).map(|l| l.marking_at(side, s).kind)
    }

    /// Crossing is legal only over dashed markings, and only towards an existing neighbor.
    pub fn can_cross(&self, lane: LaneId, side: Side, s: f64) -> bool {
        self.neighbor(lane, side).is_some()
            && self.crossing_kind(lane, side, s) == Some(MarkingKind::Dashed)
    }

    /// Mean marking quality over a window that may run past the end of
    /// `lane` into its successor chain. Windows past a dead end are clamped.
    pub fn quality_ahead(&self, lane: LaneId, side: Side, s_from: f64, s_to: f64) -> f64 {
        let Some(start) = self.lane(lane) else {
            return 0.0;
        };
        let a = s_from.max(0.0);
        let mut b = s_to;
        let mut sum = 0.0;
        let mut total = 0.0;
        let mut cur = start;
        let mut offset = 0.0;
        // bounded walk; a window never spans more than a handful of lanes
        for _ in 0..16 {
            let len = cur.length();
            let lo = (a - offset).clamp(0.0, len);
            let hi = (b - offset).clamp(0.0, len);
            if hi > lo {
                let (s, t) = weighted_quality(cur.markings(side), lo, hi);
                sum += s;
                total += t;
            }
            if b - offset <= len {
                break;
            }
            match cur.successor.and_then(|id| self.lane(id)) {
                Some(next) => {
                    offset += len;
                    cur = next;
                }
                None => {
                    b = offset + len;
                    break;
                }
            }
        }
        if total <= 0.0 {
            let start_len = start.length();
            return if a >= start_len && start.successor.is_none() {
                start.marking_at(side, start_len).quality
            } else {
                start.marking_at(side, a.min(b)).quality
            };
        }
        sum / total
    }

    /// Assigns `p` to the nearest lane among `hint`, its neighbors and its
    /// successor. Falls back to a full scan when `hint` is unknown.
    pub fn localize(&self, hint: LaneId, p: Vec2) -> LaneRef {
        let candidates: Vec<LaneId> = match self.lane(hint) {
            Some(lane) => {
                let adj = self.adjacency(hint);
                let mut c = vec![hint];
                c.extend(adj.left);
                c.extend(adj.right);
                c.extend(lane.successor);
                c
            }
            None => self.lanes.iter().map(|l| l.id).collect(),
        };
        let mut best: Option<(f64, LaneRef)> = None;
        for id in candidates {
            let Some(lane) = self.lane(id) else { continue };
            let proj = lane.project(p);
            let mut score = proj.d.abs();
            // points beyond a dead end prefer any lane that still continues
            let clamped_past_end = proj.s >= lane.length() && lane.successor.is_none();
            if clamped_past_end && id != hint {
                score += 1e3;
            }
            let better = match &best {
                None => true,
                Some((b, _)) => score < *b - 1e-12,
            };
            if better {
                best = Some((
                    score,
                    LaneRef {
                        lane: id,
                        s: proj.s,
                        d: proj.d,
                    },
                ));
            }
        }
        best.map(|(_, r)| r).unwrap_or(LaneRef {
            lane: hint,
            s: 0.0,
            d: 0.0,
        })
    }

    /// Polyline along the lane chain from `(lane, s)` for up to `max_len`
    /// meters, stopping near `destination` when one is given.
    pub fn route(
        &self,
        lane: LaneId,
        s: f64,
        destination: Option<Vec2>,
        max_len: f64,
        step: f64,
    ) -> Vec<Vec2> {
        let mut out = Vec::new();
        let Some(mut cur) = self.lane(lane) else {
            return out;
        };
        let mut s = s.clamp(0.0, cur.length());
        let mut travelled = 0.0;
        let mut best_dist = f64::INFINITY;
        let mut best_len = 0;
        while travelled <= max_len {
            let p = cur.point_at(s);
            out.push(p);
            if let Some(dest) = destination {
                let dist = p.distance(dest);
                if dist < best_dist {
                    best_dist = dist;
                    best_len = out.len();
                }
            }
            s += step;
            travelled += step;
            if s > cur.length() {
                match cur.successor.and_then(|id| self.lane(id)) {
                    Some(next) => {
                        s -= cur.length();
                        cur = next;
                    }
                    None => {
                        out.push(cur.point_at(cur.length()));
                        break;
                    }
                }
            }
        }
        if destination.is_some() {
            out.truncate(best_len.max(1));
        }
        out
    }

    /// Walks `ds ≥ 0` meters along the successor chain; clamps at a dead end.
    pub fn advance(&self, lane: LaneId, s: f64, ds: f64) -> (LaneId, f64) {
        let Some(mut cur) = self.lane(lane) else {
            return (lane, s);
        };
        let mut s = s + ds.max(0.0);
        for _ in 0..64 {
            if s <= cur.length() {
                return (cur.id, s);
            }
            match cur.successor.and_then(|id| self.lane(id)) {
                Some(next) => {
                    s -= cur.length();
                    cur = next;
                }
                None => return (cur.id, cur.length()),
            }
        }
        (cur.id, s.min(cur.length()))
    }

    /// World point `ds` meters ahead of `(lane, s)` at lateral offset `d`.
    pub fn point_ahead(&self, lane: LaneId, s: f64, ds: f64, d: f64) -> Option<Vec2> {
        let (id, s) = self.advance(lane, s, ds);
        self.lane(id).map(|l| l.offset_point(s, d))
    }
}
