//! Vector-field-inequality rows.
//!
//! Every constraint bounds the rate at which a distance error `d̃ = d − d_safe` may change.
//! First order (velocity control): keep-out `−J_d q̇ ≤ η d̃`, keep-in `J_d q̇ ≤ −η d̃`.
//! Second order (acceleration control): keep-out `−J_d q̈ ≤ β_d`, keep-in `J_d q̈ ≤ −β_d`, with
//! `β_d = (η₁ J_d + J̇_d) q̇ + η₂ d̃`.

use nalgebra::{DMatrix, DVector, RowDVector, Unit, UnitQuaternion};

use crate::error::{check_dim, Error, HypothesisError, Result};
use crate::geometry::{self, Plane, PluckerLine, Vec3};
use crate::kinematics::{
    forward_kinematics, jacobian_time_derivative, ChainPoses, JacobianKind, JointState, RobotLine, RobotPoint,
    SerialChain, JDOT_STEP,
};

/// Line–line distance below which the torso–arm constraint falls back to a point–line pair.
pub const DEFAULT_SWITCH_THRESHOLD: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    /// Stay farther than the safe value.
    KeepOut,
    /// Stay closer than the safe value.
    KeepIn,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Order {
    /// Rows on `q̇`.
    First,
    /// Rows on `q̈`.
    Second,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VfiGains {
    /// First-order approach gain (1/s).
    pub eta: f64,
    pub eta1: f64,
    pub eta2: f64,
}

impl Default for VfiGains {
    fn default() -> Self {
        Self {
            eta: 0.36,
            eta1: 1.5,
            eta2: 0.3,
        }
    }
}

impl VfiGains {
    pub fn new(eta: f64, eta1: f64, eta2: f64) -> Result<Self> {
        let gains = Self { eta, eta1, eta2 };
        gains.validate()?;
        Ok(gains)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eta >= 0.0) || !self.eta.is_finite() {
            return Err(Error::Range {
                value: self.eta,
                min: 0.0,
                max: f64::INFINITY,
            });
        }
        check_second_order_gains(self.eta1, self.eta2)?;
        Ok(())
    }
}

fn check_second_order_gains(eta1: f64, eta2: f64) -> std::result::Result<(), HypothesisError> {
    if !(eta1 > 0.0 && eta2 > 0.0) || !eta1.is_finite() || !eta2.is_finite() {
        return Err(HypothesisError::NonPositiveGains { eta1, eta2 });
    }
    let discriminant = eta1 * eta1 - 4.0 * eta2;
    if !(discriminant > 0.0) {
        return Err(HypothesisError::Oscillatory { discriminant });
    }
    Ok(())
}

/// The robot-side and static entities a constraint relates.
#[derive(Debug, Clone, PartialEq)]
pub enum ConstraintKind {
    PointPlane {
        point: RobotPoint,
        plane: Plane,
    },
    PointLine {
        point: RobotPoint,
        line: PluckerLine,
    },
    LineLine {
        line: RobotLine,
        target: PluckerLine,
    },
    /// Angle between a robot line and a fixed direction, measured on the chord metric.
    Cone {
        line: RobotLine,
        axis: Vec3,
    },
    /// One cone per joint around its mid-range; `safe` is ignored in favour of each half range.
    JointLimits,
    /// Self-collision between two robot lines, switching to the nearer endpoint when they cross.
    TorsoArm {
        torso: RobotLine,
        forearm: RobotLine,
        hand: RobotPoint,
        elbow: RobotPoint,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintSpec {
    pub name: String,
    pub kind: ConstraintKind,
    pub direction: Direction,
    /// `d_safe` in metres, or `f(φ_safe)` for cones.
    pub safe: f64,
    pub gains: VfiGains,
    pub switch_threshold: f64,
}

impl ConstraintSpec {
    pub fn new(
        name: impl Into<String>,
        kind: ConstraintKind,
        direction: Direction,
        safe: f64,
        gains: VfiGains,
    ) -> Result<Self> {
        if !(safe >= 0.0) || !safe.is_finite() {
            return Err(Error::Range {
                value: safe,
                min: 0.0,
                max: f64::INFINITY,
            });
        }
        gains.validate()?;
        Ok(Self {
            name: name.into(),
            kind,
            direction,
            safe,
            gains,
            switch_threshold: DEFAULT_SWITCH_THRESHOLD,
        })
    }

    pub fn keep_out(name: impl Into<String>, kind: ConstraintKind, d_safe: f64, gains: VfiGains) -> Result<Self> {
        Self::new(name, kind, Direction::KeepOut, d_safe, gains)
    }

    /// Keep `line` within `phi_safe` radians of `axis`.
    pub fn cone(name: impl Into<String>, line: RobotLine, axis: Vec3, phi_safe: f64, gains: VfiGains) -> Result<Self> {
        if !(0.0..=std::f64::consts::PI).contains(&phi_safe) {
            return Err(Error::Range {
                value: phi_safe,
                min: 0.0,
                max: std::f64::consts::PI,
            });
        }
        let n = axis.norm();
        if !(n > 1e-12) {
            return Err(Error::DegenerateGeometry("cone axis has zero length".into()));
        }
        let kind = ConstraintKind::Cone { line, axis: axis / n };
        Self::new(
            name,
            kind,
            Direction::KeepIn,
            geometry::metric_from_phi(phi_safe),
            gains,
        )
    }

    pub fn joint_limits(name: impl Into<String>, gains: VfiGains) -> Result<Self> {
        Self::new(name, ConstraintKind::JointLimits, Direction::KeepIn, 0.0, gains)
    }

    pub fn with_switch_threshold(mut self, eps: f64) -> Result<Self> {
        if !(eps > 0.0) || !eps.is_finite() {
            return Err(Error::Range {
                value: eps,
                min: 0.0,
                max: f64::INFINITY,
            });
        }
        self.switch_threshold = eps;
        Ok(self)
    }

    /// `φ_safe` for a cone spec.
    pub fn phi_safe(&self) -> Option<f64> {
        match self.kind {
            ConstraintKind::Cone { .. } => geometry::phi_from_metric(self.safe).ok(),
            _ => None,
        }
    }

    /// Number of rows this spec contributes for an `n`-joint chain.
    pub fn row_count(&self, dof: usize) -> usize {
        match self.kind {
            ConstraintKind::JointLimits => dof,
            _ => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Endpoint {
    Hand,
    Elbow,
}

/// Which code path produced a row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Branch {
    Single,
    Joint(usize),
    LineLine,
    PointLine(Endpoint),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintRow {
    pub jacobian: RowDVector<f64>,
    pub rhs: f64,
    /// The raw distance (or chord metric) `d`.
    pub value: f64,
    /// `d − safe`.
    pub error: f64,
    pub direction: Direction,
    pub spec: String,
    pub branch: Branch,
}

impl ConstraintRow {
    /// `spec` for single rows, `spec[j]` for per-joint rows.
    pub fn tag(&self) -> String {
        match self.branch {
            Branch::Joint(j) => format!("{}[{j}]", self.spec),
            _ => self.spec.clone(),
        }
    }

    pub fn slack(&self, u: &DVector<f64>) -> f64 {
        self.rhs - (&self.jacobian * u)[0]
    }

    /// Whether the distance itself is on the safe side.
    pub fn is_safe(&self, tol: f64) -> bool {
        match self.direction {
            Direction::KeepOut => self.error >= -tol,
            Direction::KeepIn => self.error <= tol,
        }
    }
}

fn assemble(
    spec: &ConstraintSpec,
    branch: Branch,
    value: f64,
    safe: f64,
    j: RowDVector<f64>,
    rhs_core: f64,
) -> ConstraintRow {
    let (jacobian, rhs) = match spec.direction {
        Direction::KeepOut => (-j, rhs_core),
        Direction::KeepIn => (j, -rhs_core),
    };
    ConstraintRow {
        jacobian,
        rhs,
        value,
        error: value - safe,
        direction: spec.direction,
        spec: spec.name.clone(),
        branch,
    }
}

fn first_with(spec: &ConstraintSpec, branch: Branch, d: f64, safe: f64, j_d: &RowDVector<f64>) -> ConstraintRow {
    let eta = spec.gains.eta;
    assemble(spec, branch, d, safe, j_d.clone(), eta * (d - safe))
}

fn second_with(
    spec: &ConstraintSpec,
    branch: Branch,
    d: f64,
    safe: f64,
    j_d: &RowDVector<f64>,
    jdot_d: &RowDVector<f64>,
    qdot: &DVector<f64>,
) -> ConstraintRow {
    let VfiGains { eta1, eta2, .. } = spec.gains;
    let beta = ((j_d * eta1 + jdot_d) * qdot)[0] + eta2 * (d - safe);
    assemble(spec, branch, d, safe, j_d.clone(), beta)
}

pub fn first_order_row(spec: &ConstraintSpec, d: f64, j_d: &RowDVector<f64>) -> ConstraintRow {
    first_with(spec, Branch::Single, d, spec.safe, j_d)
}

pub fn second_order_row(
    spec: &ConstraintSpec,
    d: f64,
    j_d: &RowDVector<f64>,
    jdot_d: &RowDVector<f64>,
    qdot: &DVector<f64>,
) -> ConstraintRow {
    second_with(spec, Branch::Single, d, spec.safe, j_d, jdot_d, qdot)
}

/// Keep-in row on the chord metric `f = ‖l_z − l‖²`; pass `(J̇_φ, q̇)` for the second-order form.
pub fn cone_row(
    spec: &ConstraintSpec,
    lz: &Vec3,
    static_line: &Vec3,
    j_phi: &RowDVector<f64>,
    second: Option<(&RowDVector<f64>, &DVector<f64>)>,
) -> Result<ConstraintRow> {
    let f = geometry::angle_metric(lz, static_line)?;
    let cone = ConstraintSpec {
        direction: Direction::KeepIn,
        ..spec.clone()
    };
    Ok(match second {
        None => first_order_row(&cone, f, j_phi),
        Some((jdot, qdot)) => second_order_row(&cone, f, j_phi, jdot, qdot),
    })
}

/// Chord metric of joint `j` against its mid-range line and its derivative in `q_j`, both
/// evaluated in the joint's parent frame.
fn joint_cone(chain: &SerialChain, j: usize, qj: f64) -> (Vec3, Vec3, f64) {
    let joint = &chain.joints()[j];
    let axis = Unit::new_unchecked(joint.axis);
    let lz = UnitQuaternion::from_axis_angle(&axis, qj) * joint.link_axis;
    let l = UnitQuaternion::from_axis_angle(&axis, joint.mid_range()) * joint.link_axis;
    let j_phi = 2.0 * (lz - l).dot(&joint.axis.cross(&lz));
    (lz, l, j_phi)
}

/// One keep-in cone per joint, around the mid-range line with `φ_safe,j` the half range.
/// With `qdot` the rows are second order.
pub fn joint_limit_rows(
    chain: &SerialChain,
    q: &DVector<f64>,
    qdot: Option<&DVector<f64>>,
    spec: &ConstraintSpec,
) -> Result<Vec<ConstraintRow>> {
    let n = chain.dof();
    check_dim("joint position", n, q.len())?;
    if let Some(v) = qdot {
        check_dim("joint velocity", n, v.len())?;
    }
    let cone = ConstraintSpec {
        direction: Direction::KeepIn,
        ..spec.clone()
    };
    let mut rows = Vec::with_capacity(n);
    for (j, joint) in chain.joints().iter().enumerate() {
        let (lz, l, j_phi) = joint_cone(chain, j, q[j]);
        let f = geometry::angle_metric(&lz, &l)?;
        let safe = geometry::metric_from_phi(joint.half_range());
        let mut jrow = RowDVector::zeros(n);
        jrow[j] = j_phi;
        let row = match qdot {
            None => first_with(&cone, Branch::Joint(j), f, safe, &jrow),
            Some(v) => {
                let h = v[j] * JDOT_STEP;
                let ahead = joint_cone(chain, j, q[j] + h).2;
                let behind = joint_cone(chain, j, q[j] - h).2;
                let mut jdot = RowDVector::zeros(n);
                jdot[j] = (ahead - behind) / (2.0 * JDOT_STEP);
                second_with(&cone, Branch::Joint(j), f, safe, &jrow, &jdot, v)
            }
        };
        rows.push(row);
    }
    Ok(rows)
}

/// Row for a single-valued kind, first or second order.
fn kind_row(
    chain: &SerialChain,
    poses: &ChainPoses,
    state: &JointState,
    spec: &ConstraintSpec,
    branch: Branch,
    kind: &JacobianKind,
    order: Order,
) -> Result<ConstraintRow> {
    let d = poses.value(kind)?[0];
    let j = poses.jacobian(kind)?.row();
    Ok(match order {
        Order::First => first_with(spec, branch, d, spec.safe, &j),
        Order::Second => {
            let jdot = jacobian_time_derivative(chain, &state.q, &state.qdot, kind)?.row();
            second_with(spec, branch, d, spec.safe, &j, &jdot, &state.qdot)
        }
    })
}

/// Which primitive pair the torso–arm constraint uses at this configuration.
pub fn torso_arm_kind(
    poses: &ChainPoses,
    torso: &RobotLine,
    forearm: &RobotLine,
    hand: &RobotPoint,
    elbow: &RobotPoint,
    switch_threshold: f64,
) -> Result<(Branch, JacobianKind)> {
    let a = poses.line(torso.frame, &torso.local_axis, &torso.local_point)?;
    let b = poses.line(forearm.frame, &forearm.local_axis, &forearm.local_point)?;
    if geometry::dist_line_line(&a, &b) > switch_threshold {
        return Ok((
            Branch::LineLine,
            JacobianKind::LineRobotLineDistance {
                line: *forearm,
                other: *torso,
            },
        ));
    }
    let d_hand = geometry::dist_point_line(&poses.point(hand.frame, &hand.local_point)?, &a);
    let d_elbow = geometry::dist_point_line(&poses.point(elbow.frame, &elbow.local_point)?, &a);
    let (endpoint, point) = if d_elbow < d_hand {
        (Endpoint::Elbow, elbow)
    } else {
        (Endpoint::Hand, hand)
    };
    Ok((
        Branch::PointLine(endpoint),
        JacobianKind::PointRobotLineDistance {
            frame: point.frame,
            local_point: point.local_point,
            line: *torso,
        },
    ))
}

/// Keep-out row between the torso and forearm lines, or between the torso line and whichever
/// of hand and elbow is nearer once the lines come within the switch threshold.
#[allow(clippy::too_many_arguments)]
pub fn torso_arm_row(
    chain: &SerialChain,
    state: &JointState,
    torso: &RobotLine,
    forearm: &RobotLine,
    hand: &RobotPoint,
    elbow: &RobotPoint,
    spec: &ConstraintSpec,
    order: Order,
) -> Result<ConstraintRow> {
    let poses = forward_kinematics(chain, &state.q)?;
    let (branch, kind) = torso_arm_kind(&poses, torso, forearm, hand, elbow, spec.switch_threshold)?;
    kind_row(chain, &poses, state, spec, branch, &kind, order)
}

/// All rows for `specs`, in spec order.
pub fn build_rows(
    chain: &SerialChain,
    state: &JointState,
    specs: &[ConstraintSpec],
    order: Order,
) -> Result<Vec<ConstraintRow>> {
    state.validate(chain)?;
    let poses = forward_kinematics(chain, &state.q)?;
    let mut rows = Vec::new();
    for spec in specs {
        match &spec.kind {
            ConstraintKind::PointPlane { point, plane } => {
                let kind = JacobianKind::PointPlaneDistance {
                    frame: point.frame,
                    local_point: point.local_point,
                    plane: *plane,
                };
                rows.push(kind_row(chain, &poses, state, spec, Branch::Single, &kind, order)?);
            }
            ConstraintKind::PointLine { point, line } => {
                let kind = JacobianKind::PointLineDistance {
                    frame: point.frame,
                    local_point: point.local_point,
                    static_line: *line,
                };
                rows.push(kind_row(chain, &poses, state, spec, Branch::Single, &kind, order)?);
            }
            ConstraintKind::LineLine { line, target } => {
                let kind = JacobianKind::LineLineDistance {
                    frame: line.frame,
                    local_axis: line.local_axis,
                    local_point: line.local_point,
                    static_line: *target,
                };
                rows.push(kind_row(chain, &poses, state, spec, Branch::Single, &kind, order)?);
            }
            ConstraintKind::Cone { line, axis } => {
                let lz = poses.line(line.frame, &line.local_axis, &line.local_point)?;
                let target = geometry::line_through(&lz.closest_point_to_origin(), axis)?;
                let kind = JacobianKind::LineAngle {
                    frame: line.frame,
                    local_axis: line.local_axis,
                    local_point: line.local_point,
                    static_line: target,
                };
                let j = poses.jacobian(&kind)?.row();
                let row = match order {
                    Order::First => cone_row(spec, lz.direction(), axis, &j, None)?,
                    Order::Second => {
                        let jdot = jacobian_time_derivative(chain, &state.q, &state.qdot, &kind)?.row();
                        cone_row(spec, lz.direction(), axis, &j, Some((&jdot, &state.qdot)))?
                    }
                };
                rows.push(row);
            }
            ConstraintKind::JointLimits => {
                let qdot = (order == Order::Second).then_some(&state.qdot);
                rows.extend(joint_limit_rows(chain, &state.q, qdot, spec)?);
            }
            ConstraintKind::TorsoArm {
                torso,
                forearm,
                hand,
                elbow,
            } => {
                let (branch, kind) = torso_arm_kind(&poses, torso, forearm, hand, elbow, spec.switch_threshold)?;
                rows.push(kind_row(chain, &poses, state, spec, branch, &kind, order)?);
            }
        }
    }
    Ok(rows)
}

/// `W` and `w` with one row per constraint row, in order.
pub fn stack(rows: &[ConstraintRow], n: usize) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let mut w_mat = DMatrix::zeros(rows.len(), n);
    let mut w = DVector::zeros(rows.len());
    for (i, row) in rows.iter().enumerate() {
        check_dim("constraint row columns", n, row.jacobian.len())?;
        if !row.rhs.is_finite() || row.jacobian.iter().any(|v| !v.is_finite()) {
            return Err(Error::DegenerateGeometry(format!(
                "constraint {} produced a non-finite row",
                row.tag()
            )));
        }
        w_mat.row_mut(i).copy_from(&row.jacobian);
        w[i] = row.rhs;
    }
    Ok((w_mat, w))
}

/// Closed-form trajectory of the saturated second-order inequality `d̈ + η₁ḋ + η₂d = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct LemmaTrace {
    pub times: Vec<f64>,
    pub distance: Vec<f64>,
    pub rate: Vec<f64>,
    /// Slower root.
    pub r1: f64,
    /// Faster root.
    pub r2: f64,
    pub c1: f64,
    pub c2: f64,
    pub min_distance: f64,
    /// Largest gap between the closed form and an RK4 integration over the samples.
    pub integration_error: f64,
}

impl LemmaTrace {
    pub fn distance_at(&self, t: f64) -> f64 {
        (self.c1 * (self.r1 * t).exp() + self.c2 * (self.r2 * t).exp()) / (self.r1 - self.r2)
    }

    pub fn rate_at(&self, t: f64) -> f64 {
        (self.c1 * self.r1 * (self.r1 * t).exp() + self.c2 * self.r2 * (self.r2 * t).exp()) / (self.r1 - self.r2)
    }
}

/// Checks the hypotheses under which the second-order inequality keeps `d̃` positive.
pub fn check_lemma_hypotheses(eta1: f64, eta2: f64, d0: f64, ddot0: f64) -> std::result::Result<(), HypothesisError> {
    check_second_order_gains(eta1, eta2)?;
    if !(d0 > 0.0) || !d0.is_finite() {
        return Err(HypothesisError::NonPositiveInitialDistance { d0 });
    }
    let required = 2.0 * ddot0.abs() / d0;
    if !(eta1 >= required) {
        return Err(HypothesisError::InsufficientDamping { eta1, required });
    }
    Ok(())
}

pub fn lemma_oracle(
    eta1: f64,
    eta2: f64,
    d0: f64,
    ddot0: f64,
    horizon: f64,
    dt: f64,
) -> std::result::Result<LemmaTrace, HypothesisError> {
    check_lemma_hypotheses(eta1, eta2, d0, ddot0)?;
    if !(horizon >= 0.0 && dt > 0.0) || !horizon.is_finite() || !dt.is_finite() {
        return Err(HypothesisError::BadHorizon);
    }
    let sq = (eta1 * eta1 - 4.0 * eta2).sqrt();
    let r2 = -0.5 * (eta1 + sq);
    // Vieta avoids the cancellation in (−η₁ + √Δ)/2.
    let r1 = eta2 / r2;
    let mut trace = LemmaTrace {
        times: Vec::new(),
        distance: Vec::new(),
        rate: Vec::new(),
        r1,
        r2,
        c1: ddot0 - d0 * r2,
        c2: d0 * r1 - ddot0,
        min_distance: f64::INFINITY,
        integration_error: 0.0,
    };

    let samples = (horizon / dt).round() as usize;
    let substeps = ((dt * r2.abs() / 0.01).ceil() as usize).max(1);
    let h = dt / substeps as f64;
    let field = |x: [f64; 2]| [x[1], -eta1 * x[1] - eta2 * x[0]];
    let mut x = [d0, ddot0];
    for k in 0..=samples {
        let t = k as f64 * dt;
        if k > 0 {
            for _ in 0..substeps {
                let k1 = field(x);
                let k2 = field([x[0] + 0.5 * h * k1[0], x[1] + 0.5 * h * k1[1]]);
                let k3 = field([x[0] + 0.5 * h * k2[0], x[1] + 0.5 * h * k2[1]]);
                let k4 = field([x[0] + h * k3[0], x[1] + h * k3[1]]);
                for i in 0..2 {
                    x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
                }
            }
        }
        let d = trace.distance_at(t);
        trace.integration_error = trace.integration_error.max((d - x[0]).abs());
        trace.min_distance = trace.min_distance.min(d);
        trace.times.push(t);
        trace.distance.push(d);
        trace.rate.push(trace.rate_at(t));
    }
    Ok(trace)
}
