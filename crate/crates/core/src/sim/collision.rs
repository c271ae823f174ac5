//! Independent distance checks between robot-attached and static primitives.
//!
//! Distances here are recomputed from the raw primitive definitions with textbook closest-point
//! formulas; nothing is shared with the constraint code, so the checker can referee it.

use nalgebra::{DVector, Isometry3, Point3};

use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::kinematics::{forward_kinematics, FrameId, SerialChain};

/// A pair closer than `d_safe − VIOLATION_TOL` is a violation.
pub const VIOLATION_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub enum Shape {
    Point(Vec3),
    Sphere {
        center: Vec3,
        radius: f64,
    },
    Segment {
        a: Vec3,
        b: Vec3,
    },
    Line {
        point: Vec3,
        direction: Vec3,
    },
    /// Half-space boundary; distances are signed, positive on the `normal` side.
    Plane {
        point: Vec3,
        normal: Vec3,
    },
}

/// A shape given in an attachment frame, or in the world when `frame` is `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct Body {
    pub name: String,
    pub frame: Option<FrameId>,
    pub shape: Shape,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CollisionPair {
    pub name: String,
    pub a: Body,
    pub b: Body,
    pub d_safe: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairDistance {
    pub name: String,
    pub distance: f64,
    pub d_safe: f64,
    pub violated: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CollisionReport {
    pub pairs: Vec<PairDistance>,
}

impl CollisionReport {
    pub fn violations(&self) -> impl Iterator<Item = &PairDistance> {
        self.pairs.iter().filter(|p| p.violated)
    }

    pub fn is_clear(&self) -> bool {
        self.violations().next().is_none()
    }
}

fn moved(shape: &Shape, pose: &Isometry3<f64>) -> Shape {
    let p = |v: &Vec3| (pose * Point3::from(*v)).coords;
    let r = |v: &Vec3| pose.rotation * v;
    match shape {
        Shape::Point(v) => Shape::Point(p(v)),
        Shape::Sphere { center, radius } => Shape::Sphere {
            center: p(center),
            radius: *radius,
        },
        Shape::Segment { a, b } => Shape::Segment { a: p(a), b: p(b) },
        Shape::Line { point, direction } => Shape::Line {
            point: p(point),
            direction: r(direction),
        },
        Shape::Plane { point, normal } => Shape::Plane {
            point: p(point),
            normal: r(normal),
        },
    }
}

/// Shape stripped of its radius.
enum Core {
    Point(Vec3),
    Segment(Vec3, Vec3),
    Line(Vec3, Vec3),
    Plane(Vec3, Vec3),
}

fn core(shape: &Shape) -> (Core, f64) {
    match shape {
        Shape::Point(p) => (Core::Point(*p), 0.0),
        Shape::Sphere { center, radius } => (Core::Point(*center), *radius),
        Shape::Segment { a, b } => (Core::Segment(*a, *b), 0.0),
        Shape::Line { point, direction } => (Core::Line(*point, direction.normalize()), 0.0),
        Shape::Plane { point, normal } => (Core::Plane(*point, normal.normalize()), 0.0),
    }
}

fn point_segment(p: &Vec3, a: &Vec3, b: &Vec3) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_squared();
    let t = if len2 > 0.0 {
        ((p - a).dot(&ab) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    (p - (a + ab * t)).norm()
}

fn point_line(p: &Vec3, o: &Vec3, u: &Vec3) -> f64 {
    let w = p - o;
    (w - u * w.dot(u)).norm()
}

/// Closest approach of two segments (Ericson, Real-Time Collision Detection, 5.1.9).
fn segment_segment(p1: &Vec3, q1: &Vec3, p2: &Vec3, q2: &Vec3) -> f64 {
    let d1 = q1 - p1;
    let d2 = q2 - p2;
    let r = p1 - p2;
    let a = d1.norm_squared();
    let e = d2.norm_squared();
    let f = d2.dot(&r);
    let eps = 1e-18;
    let (s, t) = if a <= eps && e <= eps {
        (0.0, 0.0)
    } else if a <= eps {
        (0.0, (f / e).clamp(0.0, 1.0))
    } else {
        let c = d1.dot(&r);
        if e <= eps {
            ((-c / a).clamp(0.0, 1.0), 0.0)
        } else {
            let b = d1.dot(&d2);
            let denom = a * e - b * b;
            let mut s = if denom > eps {
                ((b * f - c * e) / denom).clamp(0.0, 1.0)
            } else {
                0.0
            };
            let mut t = (b * s + f) / e;
            if t < 0.0 {
                t = 0.0;
                s = (-c / a).clamp(0.0, 1.0);
            } else if t > 1.0 {
                t = 1.0;
                s = ((b - c) / a).clamp(0.0, 1.0);
            }
            (s, t)
        }
    };
    ((p1 + d1 * s) - (p2 + d2 * t)).norm()
}

/// Segment against an infinite line: the squared distance to the line is a convex quadratic
/// along the segment, so clamping its minimiser is exact.
fn segment_line(a: &Vec3, b: &Vec3, o: &Vec3, u: &Vec3) -> f64 {
    let d = b - a;
    let d_perp = d - u * d.dot(u);
    let w = a - o;
    let w_perp = w - u * w.dot(u);
    let den = d_perp.norm_squared();
    let s = if den > 1e-18 {
        (-w_perp.dot(&d_perp) / den).clamp(0.0, 1.0)
    } else {
        0.0
    };
    (w_perp + d_perp * s).norm()
}

fn line_line(o1: &Vec3, u1: &Vec3, o2: &Vec3, u2: &Vec3) -> f64 {
    let c = u1.cross(u2);
    let cn = c.norm();
    if cn < 1e-12 {
        point_line(o1, o2, u2)
    } else {
        (o2 - o1).dot(&c).abs() / cn
    }
}

fn signed_plane(p: &Vec3, o: &Vec3, n: &Vec3) -> f64 {
    n.dot(&(p - o))
}

fn core_distance(a: &Core, b: &Core) -> Option<f64> {
    use Core::*;
    Some(match (a, b) {
        (Point(p), Point(q)) => (p - q).norm(),
        (Point(p), Segment(s, e)) | (Segment(s, e), Point(p)) => point_segment(p, s, e),
        (Point(p), Line(o, u)) | (Line(o, u), Point(p)) => point_line(p, o, u),
        (Point(p), Plane(o, n)) | (Plane(o, n), Point(p)) => signed_plane(p, o, n),
        (Segment(p1, q1), Segment(p2, q2)) => segment_segment(p1, q1, p2, q2),
        (Segment(s, e), Line(o, u)) | (Line(o, u), Segment(s, e)) => segment_line(s, e, o, u),
        (Segment(s, e), Plane(o, n)) | (Plane(o, n), Segment(s, e)) => signed_plane(s, o, n).min(signed_plane(e, o, n)),
        (Line(o1, u1), Line(o2, u2)) => line_line(o1, u1, o2, u2),
        (Line(p, u), Plane(o, n)) | (Plane(o, n), Line(p, u)) => {
            if u.dot(n).abs() < 1e-12 {
                signed_plane(p, o, n)
            } else {
                f64::NEG_INFINITY
            }
        }
        (Plane(..), Plane(..)) => return None,
    })
}

/// Distance between two world-placed shapes, radii subtracted; signed against planes.
pub fn shape_distance(a: &Shape, b: &Shape) -> Result<f64> {
    let (ca, ra) = core(a);
    let (cb, rb) = core(b);
    core_distance(&ca, &cb)
        .map(|d| d - ra - rb)
        .ok_or_else(|| Error::DegenerateGeometry("plane–plane distance is not checked".into()))
}

pub fn collision_check(chain: &SerialChain, q: &DVector<f64>, pairs: &[CollisionPair]) -> Result<CollisionReport> {
    let poses = forward_kinematics(chain, q)?;
    let place = |body: &Body| -> Result<Shape> {
        match body.frame {
            None => Ok(body.shape.clone()),
            Some(f) => poses
                .attachments
                .get(f)
                .map(|pose| moved(&body.shape, pose))
                .ok_or(Error::UnknownFrame(f)),
        }
    };
    let mut report = CollisionReport::default();
    for pair in pairs {
        let distance = shape_distance(&place(&pair.a)?, &place(&pair.b)?)?;
        report.pairs.push(PairDistance {
            name: pair.name.clone(),
            distance,
            d_safe: pair.d_safe,
            violated: distance < pair.d_safe - VIOLATION_TOL,
        });
    }
    Ok(report)
}
