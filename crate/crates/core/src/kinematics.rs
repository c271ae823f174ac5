//! Serial-chain forward kinematics and the Jacobians every constraint needs.
//!
//! Joints are revolute and described screw-style: an origin offset and a unit axis, both in
//! the parent frame. Joint `i`'s frame is `T_i = T_{i-1} · Trans(origin_i) · Rot(axis_i, q_i)`,
//! with `T_{-1}` the base pose. Robot-side geometry hangs off named attachment frames.
//!
//! Distance Jacobians for point–line, point–plane and line–line pairs are obtained by the
//! chain rule from the point and line Jacobians.

use nalgebra::{DMatrix, DVector, Isometry3, Point3, RowDVector, Translation3, Unit, UnitQuaternion};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::geometry::{self, line_through, Plane, PluckerLine, Vec3, PARALLEL_TOL};

/// Step of the directional central difference used for `J̇`.
pub const JDOT_STEP: f64 = 1e-6;
/// Below this distance the point–line and line–line distance Jacobians are undefined.
pub const MIN_DISTANCE: f64 = 1e-9;

pub type FrameId = usize;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Joint {
    pub name: String,
    /// Unit rotation axis in the parent frame.
    pub axis: Vec3,
    /// Offset of the joint origin from the parent frame origin.
    pub origin: Vec3,
    pub lower: f64,
    pub upper: f64,
    /// Unit direction perpendicular to `axis` that the child link points along at `q = 0`.
    /// Used to place the joint-limit lines.
    pub link_axis: Vec3,
}

impl Joint {
    pub fn new(name: impl Into<String>, axis: Vec3, origin: Vec3, lower: f64, upper: f64) -> Result<Self> {
        let axis = unit(axis, "joint axis")?;
        let link_axis = default_perpendicular(&axis);
        Self::with_link_axis(name, axis, origin, lower, upper, link_axis)
    }

    pub fn with_link_axis(
        name: impl Into<String>,
        axis: Vec3,
        origin: Vec3,
        lower: f64,
        upper: f64,
        link_axis: Vec3,
    ) -> Result<Self> {
        let name = name.into();
        let axis = unit(axis, "joint axis")?;
        let link_axis = unit(link_axis, "joint link axis")?;
        if axis.dot(&link_axis).abs() > 1e-9 {
            return Err(Error::InvalidModel(format!(
                "joint {name}: link axis must be perpendicular to the rotation axis"
            )));
        }
        if !(lower < upper) || !lower.is_finite() || !upper.is_finite() {
            return Err(Error::InvalidModel(format!(
                "joint {name}: lower bound {lower} must be below upper bound {upper}"
            )));
        }
        if upper - lower > 2.0 * std::f64::consts::PI {
            return Err(Error::InvalidModel(format!(
                "joint {name}: range wider than 2π cannot be expressed as one angle constraint"
            )));
        }
        if !origin.iter().all(|c| c.is_finite()) {
            return Err(Error::InvalidModel(format!("joint {name}: non-finite origin")));
        }
        Ok(Self {
            name,
            axis,
            origin,
            lower,
            upper,
            link_axis,
        })
    }

    pub fn mid_range(&self) -> f64 {
        0.5 * (self.lower + self.upper)
    }

    pub fn half_range(&self) -> f64 {
        0.5 * (self.upper - self.lower)
    }
}

fn unit(v: Vec3, what: &str) -> Result<Vec3> {
    let n = v.norm();
    if !(n > 1e-12) || !n.is_finite() {
        return Err(Error::InvalidModel(format!("{what} has zero length")));
    }
    Ok(v / n)
}

/// A unit vector perpendicular to `axis`, built from whichever basis vector is least aligned.
pub fn default_perpendicular(axis: &Vec3) -> Vec3 {
    let a = axis.abs();
    let seed = if a.x <= a.y && a.x <= a.z {
        Vec3::x()
    } else if a.y <= a.z {
        Vec3::y()
    } else {
        Vec3::z()
    };
    let v = seed - axis * axis.dot(&seed);
    v.normalize()
}

/// A named frame rigidly fixed to a joint's frame, or to the base when `joint` is `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Attachment {
    pub name: String,
    pub joint: Option<usize>,
    pub pose: Isometry3<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SerialChain {
    joints: Vec<Joint>,
    base: Isometry3<f64>,
    attachments: Vec<Attachment>,
}

impl SerialChain {
    pub fn new(joints: Vec<Joint>, base: Isometry3<f64>, attachments: Vec<Attachment>) -> Result<Self> {
        if joints.is_empty() {
            return Err(Error::InvalidModel("a chain needs at least one joint".into()));
        }
        for a in &attachments {
            if let Some(j) = a.joint {
                if j >= joints.len() {
                    return Err(Error::InvalidModel(format!(
                        "attachment {} refers to joint {j} but the chain has {} joints",
                        a.name,
                        joints.len()
                    )));
                }
            }
        }
        Ok(Self {
            joints,
            base,
            attachments,
        })
    }

    pub fn dof(&self) -> usize {
        self.joints.len()
    }

    pub fn joints(&self) -> &[Joint] {
        &self.joints
    }

    pub fn base(&self) -> &Isometry3<f64> {
        &self.base
    }

    pub fn attachments(&self) -> &[Attachment] {
        &self.attachments
    }

    pub fn frame_id(&self, name: &str) -> Option<FrameId> {
        self.attachments.iter().position(|a| a.name == name)
    }

    /// Same chain with a different base pose.
    pub fn rerooted(&self, base: Isometry3<f64>) -> Self {
        Self { base, ..self.clone() }
    }

    pub fn lower_bounds(&self) -> DVector<f64> {
        DVector::from_iterator(self.dof(), self.joints.iter().map(|j| j.lower))
    }

    pub fn upper_bounds(&self) -> DVector<f64> {
        DVector::from_iterator(self.dof(), self.joints.iter().map(|j| j.upper))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct JointState {
    pub q: DVector<f64>,
    pub qdot: DVector<f64>,
    pub qddot: DVector<f64>,
}

impl JointState {
    pub fn at_rest(q: DVector<f64>) -> Self {
        let n = q.len();
        Self {
            q,
            qdot: DVector::zeros(n),
            qddot: DVector::zeros(n),
        }
    }

    pub fn new(q: DVector<f64>, qdot: DVector<f64>) -> Result<Self> {
        check_dim("joint velocity", q.len(), qdot.len())?;
        let n = q.len();
        Ok(Self {
            q,
            qdot,
            qddot: DVector::zeros(n),
        })
    }

    pub fn validate(&self, chain: &SerialChain) -> Result<()> {
        check_dim("joint position", chain.dof(), self.q.len())?;
        check_dim("joint velocity", chain.dof(), self.qdot.len())?;
        check_dim("joint acceleration", chain.dof(), self.qddot.len())?;
        let finite = self
            .q
            .iter()
            .chain(self.qdot.iter())
            .chain(self.qddot.iter())
            .all(|v| v.is_finite());
        if finite {
            Ok(())
        } else {
            Err(Error::InvalidModel("joint state has non-finite entries".into()))
        }
    }
}

/// World poses of every joint frame and attachment frame at one configuration.
#[derive(Debug, Clone)]
pub struct ChainPoses {
    pub joints: Vec<Isometry3<f64>>,
    pub attachments: Vec<Isometry3<f64>>,
    /// World rotation axis of each joint.
    axes: Vec<Vec3>,
    /// Which joint each attachment hangs from.
    parents: Vec<Option<usize>>,
}

pub fn forward_kinematics(chain: &SerialChain, q: &DVector<f64>) -> Result<ChainPoses> {
    check_dim("joint position", chain.dof(), q.len())?;
    let mut joints = Vec::with_capacity(chain.dof());
    let mut axes = Vec::with_capacity(chain.dof());
    let mut pose = chain.base;
    for (joint, &angle) in chain.joints.iter().zip(q.iter()) {
        let rot = UnitQuaternion::from_axis_angle(&Unit::new_unchecked(joint.axis), angle);
        pose *= Isometry3::from_parts(Translation3::from(joint.origin), rot);
        axes.push(pose.rotation * joint.axis);
        joints.push(pose);
    }
    let attachments = chain
        .attachments
        .iter()
        .map(|a| match a.joint {
            Some(j) => joints[j] * a.pose,
            None => chain.base * a.pose,
        })
        .collect();
    Ok(ChainPoses {
        joints,
        attachments,
        axes,
        parents: chain.attachments.iter().map(|a| a.joint).collect(),
    })
}

/// What a Jacobian differentiates, with everything needed to re-evaluate it.
#[derive(Debug, Clone, PartialEq)]
pub enum JacobianKind {
    Point {
        frame: FrameId,
        local_point: Vec3,
    },
    Line {
        frame: FrameId,
        local_axis: Vec3,
        local_point: Vec3,
    },
    LineAngle {
        frame: FrameId,
        local_axis: Vec3,
        local_point: Vec3,
        static_line: PluckerLine,
    },
    PointLineDistance {
        frame: FrameId,
        local_point: Vec3,
        static_line: PluckerLine,
    },
    PointPlaneDistance {
        frame: FrameId,
        local_point: Vec3,
        plane: Plane,
    },
    LineLineDistance {
        frame: FrameId,
        local_axis: Vec3,
        local_point: Vec3,
        static_line: PluckerLine,
    },
    /// Distance from an attached point to a line attached elsewhere on the robot; both move.
    PointRobotLineDistance {
        frame: FrameId,
        local_point: Vec3,
        line: RobotLine,
    },
    /// Distance between two robot-attached lines; both move.
    LineRobotLineDistance {
        line: RobotLine,
        other: RobotLine,
    },
}

/// A line fixed in an attachment frame: through `local_point` along `local_axis`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RobotLine {
    pub frame: FrameId,
    pub local_axis: Vec3,
    pub local_point: Vec3,
}

/// A point fixed in an attachment frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RobotPoint {
    pub frame: FrameId,
    pub local_point: Vec3,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Jacobian {
    pub kind: JacobianKind,
    /// `true` when this is `J̇` rather than `J`.
    pub time_derivative: bool,
    pub matrix: DMatrix<f64>,
}

impl Jacobian {
    fn new(kind: JacobianKind, matrix: DMatrix<f64>) -> Self {
        Self {
            kind,
            time_derivative: false,
            matrix,
        }
    }

    /// The first row, for the scalar (distance) Jacobians.
    pub fn row(&self) -> RowDVector<f64> {
        self.matrix.row(0).into_owned()
    }
}

impl ChainPoses {
    pub fn dof(&self) -> usize {
        self.joints.len()
    }

    /// World rotation axis of joint `i`.
    pub fn axis(&self, i: usize) -> &Vec3 {
        &self.axes[i]
    }

    /// World origin of joint `i`.
    pub fn origin(&self, i: usize) -> Vec3 {
        self.joints[i].translation.vector
    }

    fn check_frame(&self, frame: FrameId) -> Result<()> {
        if frame < self.attachments.len() {
            Ok(())
        } else {
            Err(Error::UnknownFrame(frame))
        }
    }

    /// World position of a point fixed in an attachment frame.
    pub fn point(&self, frame: FrameId, local_point: &Vec3) -> Result<Vec3> {
        self.check_frame(frame)?;
        Ok((self.attachments[frame] * Point3::from(*local_point)).coords)
    }

    /// World direction of an axis fixed in an attachment frame.
    pub fn direction(&self, frame: FrameId, local_axis: &Vec3) -> Result<Vec3> {
        self.check_frame(frame)?;
        Ok(self.attachments[frame].rotation * local_axis)
    }

    pub fn line(&self, frame: FrameId, local_axis: &Vec3, local_point: &Vec3) -> Result<PluckerLine> {
        let p = self.point(frame, local_point)?;
        let l = self.direction(frame, local_axis)?;
        line_through(&p, &l)
    }

    /// Joints that move the given attachment: `0..=j` for an attachment on joint `j`.
    fn moving_joints(&self, frame: FrameId) -> std::ops::Range<usize> {
        match self.parents[frame] {
            Some(j) => 0..j + 1,
            None => 0..0,
        }
    }

    pub fn point_jacobian(&self, frame: FrameId, local_point: &Vec3) -> Result<DMatrix<f64>> {
        let p = self.point(frame, local_point)?;
        let mut jac = DMatrix::zeros(3, self.dof());
        for i in self.moving_joints(frame) {
            let col = self.axes[i].cross(&(p - self.joints[i].translation.vector));
            jac.fixed_view_mut::<3, 1>(0, i).copy_from(&col);
        }
        Ok(jac)
    }

    /// Stacked `[J_l; J_m]` of the line through the attached point along the attached axis.
    pub fn line_jacobian(&self, frame: FrameId, local_axis: &Vec3, local_point: &Vec3) -> Result<DMatrix<f64>> {
        let axis_norm = local_axis.norm();
        if !(axis_norm > 1e-12) {
            return Err(Error::DegenerateGeometry("zero line axis".into()));
        }
        let local_axis = local_axis / axis_norm;
        let p = self.point(frame, local_point)?;
        let l = self.direction(frame, &local_axis)?;
        let jp = self.point_jacobian(frame, local_point)?;
        let mut jac = DMatrix::zeros(6, self.dof());
        for i in self.moving_joints(frame) {
            let ldot = self.axes[i].cross(&l);
            let pdot: Vec3 = jp.fixed_view::<3, 1>(0, i).into_owned();
            // m = p × l  ⇒  ṁ = ṗ × l + p × l̇
            let mdot = pdot.cross(&l) + p.cross(&ldot);
            jac.fixed_view_mut::<3, 1>(0, i).copy_from(&ldot);
            jac.fixed_view_mut::<3, 1>(3, i).copy_from(&mdot);
        }
        Ok(jac)
    }

    pub fn jacobian(&self, kind: &JacobianKind) -> Result<Jacobian> {
        let matrix = match kind {
            JacobianKind::Point { frame, local_point } => self.point_jacobian(*frame, local_point)?,
            JacobianKind::Line {
                frame,
                local_axis,
                local_point,
            } => self.line_jacobian(*frame, local_axis, local_point)?,
            JacobianKind::LineAngle {
                frame,
                local_axis,
                local_point,
                static_line,
            } => {
                let lz = self.line(*frame, local_axis, local_point)?;
                let jl = self.line_jacobian(*frame, local_axis, local_point)?;
                let diff = (lz.direction() - static_line.direction()).transpose() * 2.0;
                row_matrix(diff * jl.rows(0, 3))
            }
            JacobianKind::PointLineDistance {
                frame,
                local_point,
                static_line,
            } => {
                let p = self.point(*frame, local_point)?;
                let u = p.cross(static_line.direction()) - static_line.moment();
                let d = u.norm();
                if d < MIN_DISTANCE {
                    return Err(Error::DegenerateGeometry(format!(
                        "point lies on the line (distance {d}); distance Jacobian undefined"
                    )));
                }
                let jp = self.point_jacobian(*frame, local_point)?;
                point_line_row(&jp, static_line.direction(), &u, d)?
            }
            JacobianKind::PointPlaneDistance {
                frame,
                local_point,
                plane,
            } => {
                let jp = self.point_jacobian(*frame, local_point)?;
                row_matrix(plane.normal().transpose() * jp)
            }
            JacobianKind::LineLineDistance {
                frame,
                local_axis,
                local_point,
                static_line,
            } => self.line_line_row(*frame, local_axis, local_point, static_line)?,
            JacobianKind::PointRobotLineDistance {
                frame,
                local_point,
                line,
            } => {
                let p = self.point(*frame, local_point)?;
                let target = self.line(line.frame, &line.local_axis, &line.local_point)?;
                let (l, m) = (target.direction(), target.moment());
                let u = p.cross(l) - m;
                let d = u.norm();
                if d < MIN_DISTANCE {
                    return Err(Error::DegenerateGeometry(format!(
                        "point lies on the line (distance {d}); distance Jacobian undefined"
                    )));
                }
                let jp = self.point_jacobian(*frame, local_point)?;
                let jl = self.line_jacobian(line.frame, &line.local_axis, &line.local_point)?;
                let mut row = DMatrix::zeros(1, self.dof());
                for i in 0..self.dof() {
                    let pdot: Vec3 = jp.fixed_view::<3, 1>(0, i).into_owned();
                    let ldot: Vec3 = jl.fixed_view::<3, 1>(0, i).into_owned();
                    let mdot: Vec3 = jl.fixed_view::<3, 1>(3, i).into_owned();
                    // u = p × l − m  ⇒  u̇ = ṗ × l + p × l̇ − ṁ
                    row[(0, i)] = u.dot(&(pdot.cross(l) + p.cross(&ldot) - mdot)) / d;
                }
                row
            }
            JacobianKind::LineRobotLineDistance { line, other } => {
                // The distance is symmetric in its two lines, so its total derivative is the
                // sum of the partials with either line frozen at its current placement.
                let frozen_other = self.line(other.frame, &other.local_axis, &other.local_point)?;
                let frozen_line = self.line(line.frame, &line.local_axis, &line.local_point)?;
                self.line_line_row(line.frame, &line.local_axis, &line.local_point, &frozen_other)?
                    + self.line_line_row(other.frame, &other.local_axis, &other.local_point, &frozen_line)?
            }
        };
        Ok(Jacobian::new(kind.clone(), matrix))
    }

    /// The quantity a Jacobian kind differentiates: a point (3), a line `[l; m]` (6), or a
    /// scalar distance / angle metric (1).
    pub fn value(&self, kind: &JacobianKind) -> Result<DVector<f64>> {
        Ok(match kind {
            JacobianKind::Point { frame, local_point } => {
                DVector::from_column_slice(self.point(*frame, local_point)?.as_slice())
            }
            JacobianKind::Line {
                frame,
                local_axis,
                local_point,
            } => {
                let line = self.line(*frame, local_axis, local_point)?;
                let mut v = DVector::zeros(6);
                v.rows_mut(0, 3).copy_from(line.direction());
                v.rows_mut(3, 3).copy_from(line.moment());
                v
            }
            JacobianKind::LineAngle {
                frame,
                local_axis,
                local_point,
                static_line,
            } => {
                let line = self.line(*frame, local_axis, local_point)?;
                scalar(geometry::angle_metric(line.direction(), static_line.direction())?)
            }
            JacobianKind::PointLineDistance {
                frame,
                local_point,
                static_line,
            } => scalar(geometry::dist_point_line(
                &self.point(*frame, local_point)?,
                static_line,
            )),
            JacobianKind::PointPlaneDistance {
                frame,
                local_point,
                plane,
            } => scalar(geometry::dist_point_plane(&self.point(*frame, local_point)?, plane)),
            JacobianKind::LineLineDistance {
                frame,
                local_axis,
                local_point,
                static_line,
            } => {
                let line = self.line(*frame, local_axis, local_point)?;
                scalar(geometry::dist_line_line(&line, static_line))
            }
            JacobianKind::PointRobotLineDistance {
                frame,
                local_point,
                line,
            } => {
                let target = self.line(line.frame, &line.local_axis, &line.local_point)?;
                scalar(geometry::dist_point_line(&self.point(*frame, local_point)?, &target))
            }
            JacobianKind::LineRobotLineDistance { line, other } => {
                let a = self.line(line.frame, &line.local_axis, &line.local_point)?;
                let b = self.line(other.frame, &other.local_axis, &other.local_point)?;
                scalar(geometry::dist_line_line(&a, &b))
            }
        })
    }

    fn line_line_row(
        &self,
        frame: FrameId,
        local_axis: &Vec3,
        local_point: &Vec3,
        static_line: &PluckerLine,
    ) -> Result<DMatrix<f64>> {
        let moving = self.line(frame, local_axis, local_point)?;
        let distance = geometry::dist_line_line(&moving, static_line);
        if distance < MIN_DISTANCE {
            return Err(Error::DegenerateGeometry(format!(
                "lines intersect (distance {distance}); switch to a point–line constraint"
            )));
        }
        let (l1, m1) = (moving.direction(), moving.moment());
        let (l2, m2) = (static_line.direction(), static_line.moment());
        let cross = l1.cross(l2);
        let sin = cross.norm();
        if sin < PARALLEL_TOL {
            // Parallel lines: the distance is that of any point of the moving line.
            let p = self.point(frame, local_point)?;
            let u = p.cross(l2) - m2;
            let jp = self.point_jacobian(frame, local_point)?;
            return point_line_row(&jp, l2, &u, u.norm());
        }
        let jl = self.line_jacobian(frame, local_axis, local_point)?;
        let s = l1.dot(m2) + l2.dot(m1);
        let sign = s.signum();
        let mut row = DMatrix::zeros(1, self.dof());
        for i in 0..self.dof() {
            let ldot: Vec3 = jl.fixed_view::<3, 1>(0, i).into_owned();
            let mdot: Vec3 = jl.fixed_view::<3, 1>(3, i).into_owned();
            let sdot = ldot.dot(m2) + l2.dot(&mdot);
            let sin_dot = cross.dot(&ldot.cross(l2)) / sin;
            row[(0, i)] = sign * sdot / sin - s.abs() * sin_dot / (sin * sin);
        }
        Ok(row)
    }
}

fn scalar(v: f64) -> DVector<f64> {
    DVector::from_element(1, v)
}

fn row_matrix<S>(row: nalgebra::Matrix<f64, nalgebra::U1, nalgebra::Dyn, S>) -> DMatrix<f64>
where
    S: nalgebra::Storage<f64, nalgebra::U1, nalgebra::Dyn>,
{
    DMatrix::from_iterator(1, row.ncols(), row.iter().copied())
}

/// `d/dt ‖p × l − m‖ = uᵀ(ṗ × l) / d` with `u = p × l − m`.
fn point_line_row(jp: &DMatrix<f64>, l: &Vec3, u: &Vec3, d: f64) -> Result<DMatrix<f64>> {
    let mut row = DMatrix::zeros(1, jp.ncols());
    for i in 0..jp.ncols() {
        let pdot: Vec3 = jp.fixed_view::<3, 1>(0, i).into_owned();
        row[(0, i)] = u.dot(&pdot.cross(l)) / d;
    }
    Ok(row)
}

pub fn point_jacobian(chain: &SerialChain, q: &DVector<f64>, frame: FrameId, local_point: &Vec3) -> Result<Jacobian> {
    forward_kinematics(chain, q)?.jacobian(&JacobianKind::Point {
        frame,
        local_point: *local_point,
    })
}

pub fn line_jacobian(
    chain: &SerialChain,
    q: &DVector<f64>,
    frame: FrameId,
    local_axis: &Vec3,
    local_point: &Vec3,
) -> Result<Jacobian> {
    forward_kinematics(chain, q)?.jacobian(&JacobianKind::Line {
        frame,
        local_axis: *local_axis,
        local_point: *local_point,
    })
}

/// `J_φ = 2(l_z − l)ᵀ J_{l_z}`, so that `d/dt ‖l_z − l‖² = J_φ q̇` for a static line `l`.
pub fn line_angle_jacobian(
    chain: &SerialChain,
    q: &DVector<f64>,
    frame: FrameId,
    local_axis: &Vec3,
    local_point: &Vec3,
    static_line: &PluckerLine,
) -> Result<Jacobian> {
    forward_kinematics(chain, q)?.jacobian(&JacobianKind::LineAngle {
        frame,
        local_axis: *local_axis,
        local_point: *local_point,
        static_line: *static_line,
    })
}

pub fn point_line_distance_jacobian(
    chain: &SerialChain,
    q: &DVector<f64>,
    frame: FrameId,
    local_point: &Vec3,
    static_line: &PluckerLine,
) -> Result<Jacobian> {
    forward_kinematics(chain, q)?.jacobian(&JacobianKind::PointLineDistance {
        frame,
        local_point: *local_point,
        static_line: *static_line,
    })
}

pub fn point_plane_distance_jacobian(
    chain: &SerialChain,
    q: &DVector<f64>,
    frame: FrameId,
    local_point: &Vec3,
    plane: &Plane,
) -> Result<Jacobian> {
    forward_kinematics(chain, q)?.jacobian(&JacobianKind::PointPlaneDistance {
        frame,
        local_point: *local_point,
        plane: *plane,
    })
}

pub fn line_line_distance_jacobian(
    chain: &SerialChain,
    q: &DVector<f64>,
    frame: FrameId,
    local_axis: &Vec3,
    local_point: &Vec3,
    static_line: &PluckerLine,
) -> Result<Jacobian> {
    forward_kinematics(chain, q)?.jacobian(&JacobianKind::LineLineDistance {
        frame,
        local_axis: *local_axis,
        local_point: *local_point,
        static_line: *static_line,
    })
}

/// `J̇` by a central difference along the current joint velocity:
/// `(J(q + h q̇) − J(q − h q̇)) / 2h`.
pub fn jacobian_time_derivative(
    chain: &SerialChain,
    q: &DVector<f64>,
    qdot: &DVector<f64>,
    kind: &JacobianKind,
) -> Result<Jacobian> {
    check_dim("joint velocity", chain.dof(), qdot.len())?;
    let ahead = forward_kinematics(chain, &(q + qdot * JDOT_STEP))?.jacobian(kind)?;
    let behind = forward_kinematics(chain, &(q - qdot * JDOT_STEP))?.jacobian(kind)?;
    Ok(Jacobian {
        kind: kind.clone(),
        time_derivative: true,
        matrix: (ahead.matrix - behind.matrix) / (2.0 * JDOT_STEP),
    })
}
