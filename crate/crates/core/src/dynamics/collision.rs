use std::fmt;

use serde::{Serialize, Serializer};

use crate::geom::Vec2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ObjectKind {
    Ego,
    Obstacle,
    Vehicle,
    Pedestrian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ObjectId {
    pub kind: ObjectKind,
    pub index: u32,
}

impl ObjectId {
    pub const fn ego() -> Self {
        Self {
            kind: ObjectKind::Ego,
            index: 0,
        }
    }

    pub const fn obstacle(index: u32) -> Self {
        Self {
            kind: ObjectKind::Obstacle,
            index,
        }
    }

    pub const fn vehicle(index: u32) -> Self {
        Self {
            kind: ObjectKind::Vehicle,
            index,
        }
    }

    pub const fn pedestrian(index: u32) -> Self {
        Self {
            kind: ObjectKind::Pedestrian,
            index,
        }
    }
}

impl fmt::Display for ObjectId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self.kind {
            ObjectKind::Ego => return f.write_str("ego"),
            ObjectKind::Obstacle => "obstacle",
            ObjectKind::Vehicle => "vehicle",
            ObjectKind::Pedestrian => "pedestrian",
        };
        write!(f, "{kind}-{}", self.index)
    }
}

impl Serialize for ObjectId {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

/// Oriented rectangle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Footprint {
    pub id: ObjectId,
    pub center: Vec2,
    pub yaw: f64,
    pub length: f64,
    pub width: f64,
}

impl Footprint {
    pub fn new(id: ObjectId, center: Vec2, yaw: f64, length: f64, width: f64) -> Self {
        Self {
            id,
            center,
            yaw,
            length,
            width,
        }
    }

    pub fn corners(&self) -> [Vec2; 4] {
        let f = Vec2::from_angle(self.yaw) * (self.length / 2.0);
        let l = Vec2::from_angle(self.yaw).perp() * (self.width / 2.0);
        let c = self.center;
        [c + f + l, c + f - l, c - f - l, c - f + l]
    }

    fn axes(&self) -> [Vec2; 2] {
        let u = Vec2::from_angle(self.yaw);
        [u, u.perp()]
    }

    /// Strict overlap by separating axes; touching edges do not count.
    pub fn overlaps(&self, other: &Footprint) -> bool {
        if self.center.distance(other.center)
            > (self.length.hypot(self.width) + other.length.hypot(other.width)) / 2.0
        {
            return false;
        }
        let (a, b) = (self.corners(), other.corners());
        for axis in self.axes().into_iter().chain(other.axes()) {
            let span = |pts: &[Vec2; 4]| {
                pts.iter()
                    .map(|p| p.dot(axis))
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                        (lo.min(v), hi.max(v))
                    })
            };
            let (a_lo, a_hi) = span(&a);
            let (b_lo, b_hi) = span(&b);
            if a_hi.min(b_hi) - a_lo.max(b_lo) <= 1e-9 {
                return false;
            }
        }
        true
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CollisionReport {
    pub with: ObjectId,
    pub at: Vec2,
}

/// First footprint in `others` that strictly overlaps `ego`.
pub fn check_collision(ego: &Footprint, others: &[Footprint]) -> Option<CollisionReport> {
    others
        .iter()
        .find(|o| ego.overlaps(o))
        .map(|o| CollisionReport {
            with: o.id,
            at: o.center,
        })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rect(id: u32, x: f64, y: f64, yaw: f64) -> Footprint {
        Footprint::new(ObjectId::obstacle(id), Vec2::new(x, y), yaw, 4.5, 2.0)
    }

    #[test]
    fn overlap_and_touch() {
        let ego = Footprint::new(ObjectId::ego(), Vec2::new(0.0, 0.0), 0.0, 4.5, 2.0);
        assert!(check_collision(&ego, &[rect(0, 4.0, 0.0, 0.0)]).is_some());
        assert!(check_collision(&ego, &[rect(0, 4.5, 0.0, 0.0)]).is_none());
        assert!(check_collision(&ego, &[rect(0, 0.0, 2.0, 0.0)]).is_none());
        assert!(check_collision(&ego, &[rect(0, 0.0, 1.99, 0.0)]).is_some());
    }

    #[test]
    fn rotated_separation() {
        let ego = Footprint::new(ObjectId::ego(), Vec2::new(0.0, 0.0), 0.0, 4.5, 2.0);
        // diagonal neighbor whose bounding boxes overlap but shapes do not
        let o = rect(3, 4.0, 2.8, std::f64::consts::FRAC_PI_4);
        assert!(!ego.overlaps(&o));
        let o = rect(3, 2.8, 1.6, std::f64::consts::FRAC_PI_4);
        assert!(ego.overlaps(&o));
    }

    #[test]
    fn first_id_reported() {
        let ego = Footprint::new(ObjectId::ego(), Vec2::new(0.0, 0.0), 0.0, 4.5, 2.0);
        let r = check_collision(
            &ego,
            &[
                rect(0, 50.0, 0.0, 0.0),
                rect(1, 1.0, 0.0, 0.0),
                rect(2, 0.0, 0.0, 0.0),
            ],
        )
        .unwrap();
        assert_eq!(r.with, ObjectId::obstacle(1));
        assert_eq!(r.with.to_string(), "obstacle-1");
    }
}
