//! Reference path built from straight and circular segments.

use serde::{Deserialize, Serialize};

use super::Vec2;
use crate::config::wrap_phase;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum Segment {
    Straight { length: f64 },
    /// Positive `angle_deg` turns the heading counter-clockwise.
    Arc { radius: f64, angle_deg: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathSpec {
    pub start: [f64; 2],
    /// Vehicle heading at the start, degrees.
    pub heading_deg: f64,
    /// Drive the whole path backwards.
    #[serde(default)]
    pub reverse: bool,
    /// Waypoint spacing, m.
    #[serde(default = "default_spacing")]
    pub spacing: f64,
    pub segments: Vec<Segment>,
}

fn default_spacing() -> f64 {
    0.01
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PathPoint {
    pub position: [f64; 2],
    /// Vehicle heading, rad.
    pub heading: f64,
    /// Arc length from the start, m.
    pub s: f64,
    /// dψ/ds, rad/m.
    pub curvature: f64,
}

impl PathPoint {
    pub fn pos(&self) -> Vec2 {
        Vec2::new(self.position[0], self.position[1])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReferencePath {
    pub points: Vec<PathPoint>,
    pub reverse: bool,
}

impl ReferencePath {
    pub fn from_spec(spec: &PathSpec) -> Result<Self> {
        if !(spec.spacing > 0.0) || spec.segments.is_empty() {
            return Err(Error::InvalidArgument("path needs segments and a positive spacing".into()));
        }
        let dir = if spec.reverse { -1.0 } else { 1.0 };
        let mut pos = Vec2::new(spec.start[0], spec.start[1]);
        let mut heading = spec.heading_deg.to_radians();
        let mut s0 = 0.0;
        let mut points = Vec::new();
        for seg in &spec.segments {
            let (length, curvature) = match *seg {
                Segment::Straight { length } => (length, 0.0),
                Segment::Arc { radius, angle_deg } => {
                    if !(radius > 0.0) {
                        return Err(Error::InvalidArgument(format!("arc radius {radius} must be > 0")));
                    }
                    (radius * angle_deg.to_radians().abs(), angle_deg.signum() / radius)
                }
            };
            if !(length > 0.0) || !length.is_finite() {
                return Err(Error::InvalidArgument(format!("segment {seg:?} has no length")));
            }
            let steps = (length / spec.spacing).ceil() as usize;
            let at = |s: f64| -> (Vec2, f64) {
                let h = heading + curvature * s;
                let p = if curvature == 0.0 {
                    pos + Vec2::new(heading.cos(), heading.sin()) * (dir * s)
                } else {
                    pos + Vec2::new(h.sin() - heading.sin(), heading.cos() - h.cos()) * (dir / curvature)
                };
                (p, h)
            };
            for i in 0..steps {
                let s = length * i as f64 / steps as f64;
                let (p, h) = at(s);
                points.push(PathPoint {
                    position: [p.x, p.y],
                    heading: wrap_phase(h),
                    s: s0 + s,
                    curvature,
                });
            }
            let (p, h) = at(length);
            pos = p;
            heading = h;
            s0 += length;
        }
        points.push(PathPoint {
            position: [pos.x, pos.y],
            heading: wrap_phase(heading),
            s: s0,
            curvature: 0.0,
        });
        Ok(ReferencePath {
            points,
            reverse: spec.reverse,
        })
    }

    pub fn length(&self) -> f64 {
        self.points.last().map_or(0.0, |p| p.s)
    }

    pub fn goal(&self) -> &PathPoint {
        self.points.last().expect("path has points")
    }

    /// Index of the closest waypoint, searched forward from `hint`.
    pub fn nearest(&self, p: &Vec2, hint: usize) -> usize {
        let lo = hint.saturating_sub(20);
        let hi = (hint + 400).min(self.points.len());
        (lo..hi)
            .min_by(|&a, &b| {
                let da = (self.points[a].pos() - p).norm_squared();
                let db = (self.points[b].pos() - p).norm_squared();
                da.total_cmp(&db)
            })
            .unwrap_or(0)
    }

    /// Signed lateral offset of `p` from waypoint `i`, positive to the left
    /// of the direction of travel.
    pub fn cross_track(&self, i: usize, p: &Vec2) -> f64 {
        let w = &self.points[i];
        let sign = if self.reverse { -1.0 } else { 1.0 };
        let t = Vec2::new(w.heading.cos(), w.heading.sin()) * sign;
        let d = p - w.pos();
        t.x * d.y - t.y * d.x
    }
}
