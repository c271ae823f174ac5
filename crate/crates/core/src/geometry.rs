//! Analytic primitives (points, planes, Plücker lines, spheres, cylinders) and their
//! closed-form distances.
//!
//! Everything lives in one inertial frame. Lines are stored in Plücker form: a unit
//! direction `l` and a moment `m = p × l` for any point `p` on the line.

use nalgebra::{Isometry3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;

/// Tolerance on unit norms and on `l · m = 0`.
pub const UNIT_TOL: f64 = 1e-9;
/// Inputs this close to unit norm are normalized instead of rejected.
pub const NORMALIZE_TOL: f64 = 1e-6;
/// Below this `‖l1 × l2‖` two lines are treated as parallel.
pub const PARALLEL_TOL: f64 = 1e-8;

fn unit_or_normalize(v: &Vec3, what: &str) -> Result<Vec3> {
    let norm = v.norm();
    if !norm.is_finite() || (norm - 1.0).abs() > NORMALIZE_TOL {
        return Err(Error::DegenerateGeometry(format!(
            "{what} must be a unit vector, got norm {norm}"
        )));
    }
    Ok(v / norm)
}

fn is_unit(v: &Vec3) -> bool {
    (v.norm() - 1.0).abs() <= UNIT_TOL
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PluckerLine {
    direction: Vec3,
    moment: Vec3,
}

impl PluckerLine {
    /// Builds a line from direction and moment, normalizing a nearly-unit direction.
    pub fn new(direction: Vec3, moment: Vec3) -> Result<Self> {
        let direction = unit_or_normalize(&direction, "line direction")?;
        if !moment.iter().all(|c| c.is_finite()) {
            return Err(Error::DegenerateGeometry("non-finite line moment".into()));
        }
        let along = direction.dot(&moment);
        if along.abs() > NORMALIZE_TOL * (1.0 + moment.norm()) {
            return Err(Error::DegenerateGeometry(format!(
                "line moment not orthogonal to direction (l·m = {along})"
            )));
        }
        let moment = moment - direction * along;
        Ok(Self { direction, moment })
    }

    pub fn direction(&self) -> &Vec3 {
        &self.direction
    }

    pub fn moment(&self) -> &Vec3 {
        &self.moment
    }

    /// The point on the line closest to the origin, `l × m`.
    pub fn closest_point_to_origin(&self) -> Vec3 {
        self.direction.cross(&self.moment)
    }

    /// Applies a rigid transform to the line.
    pub fn transformed(&self, pose: &Isometry3<f64>) -> Self {
        let direction = pose.rotation * self.direction;
        let moment = pose.rotation * self.moment + pose.translation.vector.cross(&direction);
        Self { direction, moment }
    }

    pub fn is_valid(&self) -> bool {
        is_unit(&self.direction) && self.direction.dot(&self.moment).abs() <= UNIT_TOL
    }
}

/// `line_through(p, dir)`: the line through `p` along `dir`.
pub fn line_through(point: &Vec3, dir: &Vec3) -> Result<PluckerLine> {
    let norm = dir.norm();
    if !(norm > 1e-12) || !norm.is_finite() || !point.iter().all(|c| c.is_finite()) {
        return Err(Error::DegenerateGeometry(format!("line direction has norm {norm}")));
    }
    let direction = dir / norm;
    Ok(PluckerLine {
        direction,
        moment: point.cross(&direction),
    })
}

/// Plane `{x : n · x = offset}` with unit normal `n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Plane {
    normal: Vec3,
    offset: f64,
}

impl Plane {
    pub fn new(normal: Vec3, offset: f64) -> Result<Self> {
        let normal = unit_or_normalize(&normal, "plane normal")?;
        if !offset.is_finite() {
            return Err(Error::DegenerateGeometry("non-finite plane offset".into()));
        }
        Ok(Self { normal, offset })
    }

    /// Plane through `point` with the given (not necessarily unit) normal.
    pub fn through(point: &Vec3, normal: &Vec3) -> Result<Self> {
        let norm = normal.norm();
        if !(norm > 1e-12) {
            return Err(Error::DegenerateGeometry("zero plane normal".into()));
        }
        let normal = normal / norm;
        Self::new(normal, normal.dot(point))
    }

    pub fn normal(&self) -> &Vec3 {
        &self.normal
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn transformed(&self, pose: &Isometry3<f64>) -> Self {
        let normal = pose.rotation * self.normal;
        Self {
            normal,
            offset: self.offset + normal.dot(&pose.translation.vector),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Primitive {
    Point(Vec3),
    Sphere { center: Vec3, radius: f64 },
    Cylinder { axis: PluckerLine, radius: f64 },
    Line(PluckerLine),
    Plane(Plane),
}

impl Primitive {
    pub fn sphere(center: Vec3, radius: f64) -> Result<Self> {
        check_radius(radius)?;
        Ok(Primitive::Sphere { center, radius })
    }

    pub fn cylinder(axis: PluckerLine, radius: f64) -> Result<Self> {
        check_radius(radius)?;
        Ok(Primitive::Cylinder { axis, radius })
    }

    /// Radius of the primitive's swept volume (zero for points, lines and planes).
    pub fn radius(&self) -> f64 {
        match self {
            Primitive::Sphere { radius, .. } | Primitive::Cylinder { radius, .. } => *radius,
            _ => 0.0,
        }
    }
}

fn check_radius(radius: f64) -> Result<()> {
    if radius > 0.0 && radius.is_finite() {
        Ok(())
    } else {
        Err(Error::DegenerateGeometry(format!(
            "radius must be positive, got {radius}"
        )))
    }
}

/// Euclidean distance from `p` to the infinite line, `‖p × l − m‖`.
pub fn dist_point_line(p: &Vec3, line: &PluckerLine) -> f64 {
    (p.cross(&line.direction) - line.moment).norm()
}

/// Signed distance `n · p − offset`, positive on the side the normal points to.
pub fn dist_point_plane(p: &Vec3, plane: &Plane) -> f64 {
    plane.normal.dot(p) - plane.offset
}

/// Minimum distance between two infinite lines.
///
/// Skew lines use the reciprocal product `|l1·m2 + l2·m1| / ‖l1 × l2‖`; nearly parallel
/// lines fall back to a point-to-line distance.
pub fn dist_line_line(a: &PluckerLine, b: &PluckerLine) -> f64 {
    let cross = a.direction.cross(&b.direction);
    let sin = cross.norm();
    if sin < PARALLEL_TOL {
        dist_point_line(&a.closest_point_to_origin(), b)
    } else {
        (a.direction.dot(&b.moment) + b.direction.dot(&a.moment)).abs() / sin
    }
}

/// Squared chord between two unit directions, `‖l_z − l‖² = 2 − 2 cos φ`.
pub fn angle_metric(lz: &Vec3, l: &Vec3) -> Result<f64> {
    if !is_unit(lz) || !is_unit(l) {
        return Err(Error::DegenerateGeometry(format!(
            "angle metric needs unit vectors (norms {}, {})",
            lz.norm(),
            l.norm()
        )));
    }
    let diff = lz - l;
    Ok(diff.dot(&diff))
}

/// Inverse of the angle metric: `φ = arccos(1 − f/2)`.
pub fn phi_from_metric(f: f64) -> Result<f64> {
    const EPS: f64 = 1e-9;
    if !(-EPS..=4.0 + EPS).contains(&f) {
        return Err(Error::Range {
            value: f,
            min: 0.0,
            max: 4.0,
        });
    }
    Ok((1.0 - f / 2.0).clamp(-1.0, 1.0).acos())
}

/// `f(φ)` for a given angle.
pub fn metric_from_phi(phi: f64) -> f64 {
    2.0 - 2.0 * phi.cos()
}
