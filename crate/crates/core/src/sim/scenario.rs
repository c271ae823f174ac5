//! The TOML scenario format.
//!
//! A file names its frames and primitives; constraints, the task and the collision checks refer
//! to those names. Omitted gains take the defaults `η = 0.36`, `λ = 0.01`, `η₁ = k_d = 1.5`,
//! `η₂ = k_p = 0.3`, `k = 2`. Loading normalises the file (all defaults written out), so
//! `load(serialize(s)) == s`.

use std::collections::HashMap;

use nalgebra::{DVector, Isometry3, Matrix3, Translation3, UnitQuaternion};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::control::{BoundShape, TaskKind, TaskSpec};
use crate::dynamics::{LinkInertia, RigidBodyModel};
use crate::error::{Error, Result};
use crate::geometry::{line_through, Plane, Vec3};
use crate::kinematics::{Attachment, FrameId, Joint, JointState, RobotLine, RobotPoint, SerialChain};
use crate::vfi::{ConstraintKind, ConstraintSpec, Direction, VfiGains};

use super::collision::{Body, CollisionPair, Shape};

pub const FORMAT_VERSION: u32 = 1;

type V3 = [f64; 3];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub version: u32,
    #[serde(default)]
    pub name: String,
    /// Step for velocity mode (s).
    #[serde(default = "default_dt")]
    pub dt: f64,
    /// Step for acceleration and torque modes (s).
    #[serde(default = "default_dynamic_dt")]
    pub dynamic_dt: f64,
    #[serde(default = "default_steps")]
    pub steps: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_gravity")]
    pub gravity: V3,
    pub robot: Option<RobotFile>,
    #[serde(default)]
    pub primitives: Vec<PrimitiveFile>,
    pub task: Option<TaskFile>,
    #[serde(default)]
    pub controller: ControllerFile,
    #[serde(default)]
    pub constraints: Vec<ConstraintFile>,
    #[serde(default)]
    pub checks: Vec<CheckFile>,
    #[serde(default)]
    pub initial: InitialFile,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoseFile {
    #[serde(default)]
    pub translation: V3,
    /// Scaled rotation axis (rad).
    #[serde(default)]
    pub rotation: V3,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RobotFile {
    pub base: Option<PoseFile>,
    pub joints: Vec<JointFile>,
    #[serde(default)]
    pub frames: Vec<FrameFile>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JointFile {
    pub name: String,
    pub axis: V3,
    #[serde(default)]
    pub origin: V3,
    pub lower: f64,
    pub upper: f64,
    pub link_axis: Option<V3>,
    pub link: Option<LinkFile>,
}

/// Inertia of the link a joint drives: either a uniform rod from the joint origin to `rod`, or
/// explicit `com` and `inertia = [xx, yy, zz, xy, xz, yz]` about the centre of mass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkFile {
    pub mass: f64,
    pub rod: Option<V3>,
    pub com: Option<V3>,
    pub inertia: Option<[f64; 6]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameFile {
    pub name: String,
    /// Joint the frame hangs from; the base when omitted.
    pub joint: Option<String>,
    #[serde(default)]
    pub translation: V3,
    #[serde(default)]
    pub rotation: V3,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum PrimitiveFile {
    Point {
        name: String,
        frame: Option<String>,
        position: V3,
    },
    Line {
        name: String,
        frame: Option<String>,
        point: V3,
        direction: V3,
    },
    Plane {
        name: String,
        point: V3,
        normal: V3,
    },
    Sphere {
        name: String,
        frame: Option<String>,
        center: V3,
        radius: f64,
    },
    Segment {
        name: String,
        frame: Option<String>,
        a: V3,
        b: V3,
    },
}

impl PrimitiveFile {
    pub fn name(&self) -> &str {
        match self {
            PrimitiveFile::Point { name, .. }
            | PrimitiveFile::Line { name, .. }
            | PrimitiveFile::Plane { name, .. }
            | PrimitiveFile::Sphere { name, .. }
            | PrimitiveFile::Segment { name, .. } => name,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskFile {
    /// Only `point_plane`.
    pub kind: String,
    /// Robot point primitive.
    pub robot: String,
    /// Plane primitive.
    pub plane: String,
    #[serde(default)]
    pub target: f64,
    #[serde(default = "default_eta")]
    pub eta: f64,
    #[serde(default = "default_lambda")]
    pub lambda: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerFile {
    #[serde(default = "default_eta1")]
    pub kd: f64,
    #[serde(default = "default_eta2")]
    pub kp: f64,
    #[serde(default = "default_k")]
    pub k: f64,
    /// `norm` or `norm_plus_error`.
    #[serde(default = "default_bound_shape")]
    pub bound_shape: String,
    #[serde(default)]
    pub bound_gain: f64,
}

impl Default for ControllerFile {
    fn default() -> Self {
        Self {
            kd: default_eta1(),
            kp: default_eta2(),
            k: default_k(),
            bound_shape: default_bound_shape(),
            bound_gain: 0.0,
        }
    }
}

/// One constraint. Which fields apply depends on `kind`:
///
/// | kind           | fields                                         |
/// |----------------|------------------------------------------------|
/// | `plane`        | `robot` (point), `obstacle` (plane), `d_safe`  |
/// | `point_line`   | `robot` (point), `obstacle` (line), `d_safe`   |
/// | `line_line`    | `robot` (line), `obstacle` (line), `d_safe`    |
/// | `cone`         | `robot` (line), `axis`, `phi_safe`             |
/// | `joint_limits` | none                                           |
/// | `torso_arm`    | `torso`, `forearm` (lines), `hand`, `elbow` (points), `d_safe`, `switch` |
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstraintFile {
    pub name: String,
    pub kind: String,
    /// `keep_out` or `keep_in`; distance kinds only.
    pub direction: Option<String>,
    pub robot: Option<String>,
    pub obstacle: Option<String>,
    pub d_safe: Option<f64>,
    pub phi_safe: Option<f64>,
    pub axis: Option<V3>,
    pub torso: Option<String>,
    pub forearm: Option<String>,
    pub hand: Option<String>,
    pub elbow: Option<String>,
    pub switch: Option<f64>,
    pub eta: Option<f64>,
    pub eta1: Option<f64>,
    pub eta2: Option<f64>,
}

/// An extra pair for the collision checker.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckFile {
    pub name: String,
    pub a: String,
    pub b: String,
    pub d_safe: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialFile {
    /// Zero when omitted.
    #[serde(default)]
    pub q: Vec<f64>,
    #[serde(default)]
    pub qdot: Vec<f64>,
    /// Amplitude of a uniform perturbation of `q` drawn from `seed`.
    #[serde(default)]
    pub jitter: f64,
}

fn default_dt() -> f64 {
    0.01
}
fn default_dynamic_dt() -> f64 {
    0.001
}
fn default_steps() -> usize {
    3000
}
fn default_gravity() -> V3 {
    [0.0, 0.0, -crate::dynamics::STANDARD_GRAVITY]
}
fn default_eta() -> f64 {
    VfiGains::default().eta
}
fn default_eta1() -> f64 {
    VfiGains::default().eta1
}
fn default_eta2() -> f64 {
    VfiGains::default().eta2
}
fn default_lambda() -> f64 {
    0.01
}
fn default_k() -> f64 {
    2.0
}
fn default_bound_shape() -> String {
    "norm".into()
}

/// A validated scenario with every object built.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    /// The file with defaults written out.
    pub file: ScenarioFile,
    pub chain: SerialChain,
    /// Present when every joint has a link inertia.
    pub model: Option<RigidBodyModel>,
    pub task: TaskSpec,
    pub constraints: Vec<ConstraintSpec>,
    pub collision_pairs: Vec<CollisionPair>,
    pub initial: JointState,
}

impl Scenario {
    pub fn name(&self) -> &str {
        &self.file.name
    }
}

pub fn load_scenario(text: &str) -> Result<Scenario> {
    let file: ScenarioFile = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    build(file)
}

/// TOML text that reloads to the same scenario.
pub fn serialize_scenario(scenario: &Scenario) -> Result<String> {
    toml::to_string(&scenario.file).map_err(|e| Error::Parse(e.to_string()))
}

fn err(path: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Scenario {
        path: path.into(),
        message: message.into(),
    }
}

fn vec3(v: V3) -> Vec3 {
    Vec3::new(v[0], v[1], v[2])
}

fn pose(translation: V3, rotation: V3) -> Isometry3<f64> {
    Isometry3::from_parts(
        Translation3::from(vec3(translation)),
        UnitQuaternion::from_scaled_axis(vec3(rotation)),
    )
}

fn finite(path: &str, values: &[f64]) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(err(path, "non-finite value"))
    }
}

/// A named primitive resolved to an attachment frame (or the world).
#[derive(Debug, Clone)]
struct Resolved {
    frame: Option<FrameId>,
    file: PrimitiveFile,
}

struct Builder {
    primitives: HashMap<String, Resolved>,
}

impl Builder {
    fn get(&self, path: &str, name: &str) -> Result<&Resolved> {
        self.primitives
            .get(name)
            .ok_or_else(|| err(path, format!("unknown primitive `{name}`")))
    }

    fn robot_point(&self, path: &str, name: &str) -> Result<RobotPoint> {
        match self.get(path, name)? {
            Resolved {
                frame: Some(frame),
                file: PrimitiveFile::Point { position, .. },
            } => Ok(RobotPoint {
                frame: *frame,
                local_point: vec3(*position),
            }),
            _ => Err(err(path, format!("`{name}` must be a point attached to a robot frame"))),
        }
    }

    fn robot_line(&self, path: &str, name: &str) -> Result<RobotLine> {
        match self.get(path, name)? {
            Resolved {
                frame: Some(frame),
                file: PrimitiveFile::Line { point, direction, .. },
            } => {
                let axis = vec3(*direction);
                if !(axis.norm() > 1e-12) {
                    return Err(err(path, format!("line `{name}` has a zero direction")));
                }
                Ok(RobotLine {
                    frame: *frame,
                    local_axis: axis.normalize(),
                    local_point: vec3(*point),
                })
            }
            _ => Err(err(path, format!("`{name}` must be a line attached to a robot frame"))),
        }
    }

    fn static_plane(&self, path: &str, name: &str) -> Result<Plane> {
        match self.get(path, name)? {
            Resolved {
                file: PrimitiveFile::Plane { point, normal, .. },
                ..
            } => Plane::through(&vec3(*point), &vec3(*normal)).map_err(|e| err(path, e.to_string())),
            _ => Err(err(path, format!("`{name}` must be a plane"))),
        }
    }

    fn static_line(&self, path: &str, name: &str) -> Result<crate::geometry::PluckerLine> {
        match self.get(path, name)? {
            Resolved {
                frame: None,
                file: PrimitiveFile::Line { point, direction, .. },
            } => line_through(&vec3(*point), &vec3(*direction)).map_err(|e| err(path, e.to_string())),
            _ => Err(err(path, format!("`{name}` must be a static line"))),
        }
    }

    fn body(&self, path: &str, name: &str) -> Result<Body> {
        let r = self.get(path, name)?;
        let shape = match &r.file {
            PrimitiveFile::Point { position, .. } => Shape::Point(vec3(*position)),
            PrimitiveFile::Line { point, direction, .. } => Shape::Line {
                point: vec3(*point),
                direction: vec3(*direction),
            },
            PrimitiveFile::Plane { point, normal, .. } => Shape::Plane {
                point: vec3(*point),
                normal: vec3(*normal),
            },
            PrimitiveFile::Sphere { center, radius, .. } => Shape::Sphere {
                center: vec3(*center),
                radius: *radius,
            },
            PrimitiveFile::Segment { a, b, .. } => Shape::Segment {
                a: vec3(*a),
                b: vec3(*b),
            },
        };
        Ok(Body {
            name: name.to_string(),
            frame: r.frame,
            shape,
        })
    }

    /// Segment between two robot points, which must share a frame.
    fn segment(&self, path: &str, a: &str, b: &str) -> Result<Body> {
        let pa = self.robot_point(path, a)?;
        let pb = self.robot_point(path, b)?;
        if pa.frame != pb.frame {
            return Err(err(path, format!("`{a}` and `{b}` must share a frame")));
        }
        Ok(Body {
            name: format!("{a}-{b}"),
            frame: Some(pa.frame),
            shape: Shape::Segment {
                a: pa.local_point,
                b: pb.local_point,
            },
        })
    }
}

fn build_chain(robot: &RobotFile, gravity: V3) -> Result<(SerialChain, Option<RigidBodyModel>)> {
    if robot.joints.is_empty() {
        return Err(err("robot.joints", "at least one joint is required"));
    }
    let mut joints = Vec::with_capacity(robot.joints.len());
    let mut links = Vec::new();
    let mut index = HashMap::new();
    for (i, j) in robot.joints.iter().enumerate() {
        let path = format!("robot.joints[{i}]");
        finite(&path, &[j.axis, j.origin].concat())?;
        let joint = match j.link_axis {
            Some(la) => Joint::with_link_axis(&j.name, vec3(j.axis), vec3(j.origin), j.lower, j.upper, vec3(la)),
            None => Joint::new(&j.name, vec3(j.axis), vec3(j.origin), j.lower, j.upper),
        }
        .map_err(|e| err(&path, e.to_string()))?;
        if index.insert(j.name.clone(), i).is_some() {
            return Err(err(&path, format!("duplicate joint name `{}`", j.name)));
        }
        joints.push(joint);
        if let Some(link) = &j.link {
            links.push(build_link(&format!("{path}.link"), link)?);
        }
    }

    let mut attachments = Vec::with_capacity(robot.frames.len());
    for (i, f) in robot.frames.iter().enumerate() {
        let path = format!("robot.frames[{i}]");
        if attachments.iter().any(|a: &Attachment| a.name == f.name) {
            return Err(err(&path, format!("duplicate frame name `{}`", f.name)));
        }
        let joint = match &f.joint {
            Some(name) => Some(
                *index
                    .get(name)
                    .ok_or_else(|| err(&path, format!("unknown joint `{name}`")))?,
            ),
            None => None,
        };
        attachments.push(Attachment {
            name: f.name.clone(),
            joint,
            pose: pose(f.translation, f.rotation),
        });
    }
    let base = robot
        .base
        .as_ref()
        .map(|b| pose(b.translation, b.rotation))
        .unwrap_or_else(Isometry3::identity);
    let chain = SerialChain::new(joints, base, attachments).map_err(|e| err("robot", e.to_string()))?;

    let model = match links.len() {
        0 => None,
        n if n == chain.dof() => {
            Some(RigidBodyModel::new(chain.clone(), links, vec3(gravity)).map_err(|e| err("robot", e.to_string()))?)
        }
        _ => return Err(err("robot.joints", "either every joint or no joint must carry a link")),
    };
    Ok((chain, model))
}

fn build_link(path: &str, link: &LinkFile) -> Result<LinkInertia> {
    let built = match (link.rod, link.com, link.inertia) {
        (Some(rod), None, None) => {
            let v = vec3(rod);
            LinkInertia::uniform_rod(link.mass, &v, v.norm())
        }
        (None, Some(com), Some(i)) => {
            let inertia = Matrix3::new(i[0], i[3], i[4], i[3], i[1], i[5], i[4], i[5], i[2]);
            LinkInertia::new(link.mass, vec3(com), inertia)
        }
        _ => return Err(err(path, "give either `rod`, or both `com` and `inertia`")),
    };
    built.map_err(|e| err(path, e.to_string()))
}

fn resolve_primitives(file: &ScenarioFile, chain: &SerialChain) -> Result<HashMap<String, Resolved>> {
    let mut map = HashMap::new();
    for (i, p) in file.primitives.iter().enumerate() {
        let path = format!("primitives[{i}]");
        let frame_name = match p {
            PrimitiveFile::Point { frame, .. }
            | PrimitiveFile::Line { frame, .. }
            | PrimitiveFile::Sphere { frame, .. }
            | PrimitiveFile::Segment { frame, .. } => frame.as_ref(),
            PrimitiveFile::Plane { .. } => None,
        };
        let frame = match frame_name {
            Some(name) => Some(
                chain
                    .frame_id(name)
                    .ok_or_else(|| err(&path, format!("unknown frame `{name}`")))?,
            ),
            None => None,
        };
        let values: Vec<f64> = match p {
            PrimitiveFile::Point { position, .. } => position.to_vec(),
            PrimitiveFile::Line { point, direction, .. } => [*point, *direction].concat(),
            PrimitiveFile::Plane { point, normal, .. } => [*point, *normal].concat(),
            PrimitiveFile::Sphere { center, radius, .. } => {
                if !(*radius > 0.0) {
                    return Err(err(&path, "sphere radius must be positive"));
                }
                center.to_vec()
            }
            PrimitiveFile::Segment { a, b, .. } => [*a, *b].concat(),
        };
        finite(&path, &values)?;
        let resolved = Resolved { frame, file: p.clone() };
        if map.insert(p.name().to_string(), resolved).is_some() {
            return Err(err(&path, format!("duplicate primitive name `{}`", p.name())));
        }
    }
    Ok(map)
}

fn build_task(file: &ScenarioFile, b: &Builder) -> Result<TaskSpec> {
    let task = file
        .task
        .as_ref()
        .ok_or_else(|| err("task", "missing [task] section"))?;
    if task.kind != "point_plane" {
        return Err(err(
            "task.kind",
            format!("unknown task kind `{}` (expected point_plane)", task.kind),
        ));
    }
    let point = b.robot_point("task.robot", &task.robot)?;
    let plane = b.static_plane("task.plane", &task.plane)?;
    let c = &file.controller;
    let g = match c.bound_shape.as_str() {
        "norm" => BoundShape::Norm,
        "norm_plus_error" => BoundShape::NormPlusError { gain: c.bound_gain },
        other => {
            return Err(err(
                "controller.bound_shape",
                format!("unknown bound shape `{other}` (expected norm or norm_plus_error)"),
            ))
        }
    };
    let spec = TaskSpec {
        kind: TaskKind::PointPlane {
            point,
            plane,
            target: task.target,
        },
        eta: task.eta,
        lambda: task.lambda,
        kd: c.kd,
        kp: c.kp,
        k: c.k,
        g,
    };
    spec.validate().map_err(|e| err("task", e.to_string()))?;
    Ok(spec)
}

fn build_constraint(
    path: &str,
    c: &mut ConstraintFile,
    b: &Builder,
) -> Result<(ConstraintSpec, Option<CollisionPair>)> {
    let gains = VfiGains::new(
        *c.eta.get_or_insert(default_eta()),
        *c.eta1.get_or_insert(default_eta1()),
        *c.eta2.get_or_insert(default_eta2()),
    )
    .map_err(|e| err(path, e.to_string()))?;

    let allowed: &[&str] = match c.kind.as_str() {
        "plane" | "point_line" | "line_line" => &["direction", "robot", "obstacle", "d_safe"],
        "cone" => &["robot", "axis", "phi_safe"],
        "joint_limits" => &[],
        "torso_arm" => &["torso", "forearm", "hand", "elbow", "d_safe", "switch"],
        other => {
            return Err(err(
                format!("{path}.kind"),
                format!("unknown constraint kind `{other}`"),
            ))
        }
    };
    let present = [
        ("direction", c.direction.is_some()),
        ("robot", c.robot.is_some()),
        ("obstacle", c.obstacle.is_some()),
        ("d_safe", c.d_safe.is_some()),
        ("phi_safe", c.phi_safe.is_some()),
        ("axis", c.axis.is_some()),
        ("torso", c.torso.is_some()),
        ("forearm", c.forearm.is_some()),
        ("hand", c.hand.is_some()),
        ("elbow", c.elbow.is_some()),
        ("switch", c.switch.is_some()),
    ];
    for (field, set) in present {
        if set && !allowed.contains(&field) {
            return Err(err(
                format!("{path}.{field}"),
                format!("not allowed for kind `{}`", c.kind),
            ));
        }
    }
    fn need<'a, T>(path: &str, field: &str, v: &'a Option<T>) -> Result<&'a T> {
        v.as_ref().ok_or_else(|| err(format!("{path}.{field}"), "missing"))
    }

    let name = c.name.clone();
    let wrap = |r: Result<ConstraintSpec>| r.map_err(|e| err(path, e.to_string()));
    match c.kind.as_str() {
        "plane" | "point_line" | "line_line" => {
            let direction = match c.direction.get_or_insert_with(|| "keep_out".into()).as_str() {
                "keep_out" => Direction::KeepOut,
                "keep_in" => Direction::KeepIn,
                other => {
                    return Err(err(
                        format!("{path}.direction"),
                        format!("expected keep_out or keep_in, got `{other}`"),
                    ))
                }
            };
            let robot = need(path, "robot", &c.robot)?.clone();
            let obstacle = need(path, "obstacle", &c.obstacle)?.clone();
            let d_safe = *need(path, "d_safe", &c.d_safe)?;
            let kind = match c.kind.as_str() {
                "plane" => ConstraintKind::PointPlane {
                    point: b.robot_point(&format!("{path}.robot"), &robot)?,
                    plane: b.static_plane(&format!("{path}.obstacle"), &obstacle)?,
                },
                "point_line" => ConstraintKind::PointLine {
                    point: b.robot_point(&format!("{path}.robot"), &robot)?,
                    line: b.static_line(&format!("{path}.obstacle"), &obstacle)?,
                },
                _ => ConstraintKind::LineLine {
                    line: b.robot_line(&format!("{path}.robot"), &robot)?,
                    target: b.static_line(&format!("{path}.obstacle"), &obstacle)?,
                },
            };
            let spec = wrap(ConstraintSpec::new(name.clone(), kind, direction, d_safe, gains))?;
            let pair = (direction == Direction::KeepOut).then(|| -> Result<CollisionPair> {
                Ok(CollisionPair {
                    name,
                    a: b.body(path, &robot)?,
                    b: b.body(path, &obstacle)?,
                    d_safe,
                })
            });
            Ok((spec, pair.transpose()?))
        }
        "cone" => {
            let robot = need(path, "robot", &c.robot)?.clone();
            let line = b.robot_line(&format!("{path}.robot"), &robot)?;
            let axis = vec3(*need(path, "axis", &c.axis)?);
            let phi = *need(path, "phi_safe", &c.phi_safe)?;
            Ok((wrap(ConstraintSpec::cone(name, line, axis, phi, gains))?, None))
        }
        "joint_limits" => Ok((wrap(ConstraintSpec::joint_limits(name, gains))?, None)),
        _ => {
            let torso_name = need(path, "torso", &c.torso)?.clone();
            let forearm_name = need(path, "forearm", &c.forearm)?.clone();
            let hand_name = need(path, "hand", &c.hand)?.clone();
            let elbow_name = need(path, "elbow", &c.elbow)?.clone();
            let d_safe = *need(path, "d_safe", &c.d_safe)?;
            let switch = *c.switch.get_or_insert(crate::vfi::DEFAULT_SWITCH_THRESHOLD);
            let kind = ConstraintKind::TorsoArm {
                torso: b.robot_line(&format!("{path}.torso"), &torso_name)?,
                forearm: b.robot_line(&format!("{path}.forearm"), &forearm_name)?,
                hand: b.robot_point(&format!("{path}.hand"), &hand_name)?,
                elbow: b.robot_point(&format!("{path}.elbow"), &elbow_name)?,
            };
            let spec = wrap(
                ConstraintSpec::keep_out(name.clone(), kind, d_safe, gains)
                    .and_then(|s| s.with_switch_threshold(switch)),
            )?;
            let pair = CollisionPair {
                name,
                a: b.body(path, &torso_name)?,
                b: b.segment(path, &elbow_name, &hand_name)?,
                d_safe,
            };
            Ok((spec, Some(pair)))
        }
    }
}

fn build(mut file: ScenarioFile) -> Result<Scenario> {
    if file.version != FORMAT_VERSION {
        return Err(err(
            "version",
            format!("unsupported version {} (expected {FORMAT_VERSION})", file.version),
        ));
    }
    if !(file.dt > 0.0 && file.dt <= 0.1) {
        return Err(err("dt", format!("must lie in (0, 0.1], got {}", file.dt)));
    }
    if !(file.dynamic_dt > 0.0 && file.dynamic_dt <= 0.1) {
        return Err(err(
            "dynamic_dt",
            format!("must lie in (0, 0.1], got {}", file.dynamic_dt),
        ));
    }
    finite("gravity", &file.gravity)?;
    let robot = file
        .robot
        .as_ref()
        .ok_or_else(|| err("robot", "missing [robot] section"))?;
    let (chain, model) = build_chain(robot, file.gravity)?;
    let primitives = resolve_primitives(&file, &chain)?;
    let builder = Builder { primitives };
    let task = build_task(&file, &builder)?;

    let mut names = HashMap::new();
    let mut constraints = Vec::with_capacity(file.constraints.len());
    let mut collision_pairs = Vec::new();
    for (i, c) in file.constraints.iter_mut().enumerate() {
        let path = format!("constraints[{i}]");
        if names.insert(c.name.clone(), i).is_some() {
            return Err(err(&path, format!("duplicate constraint name `{}`", c.name)));
        }
        let (spec, pair) = build_constraint(&path, c, &builder)?;
        constraints.push(spec);
        collision_pairs.extend(pair);
    }
    for (i, check) in file.checks.iter().enumerate() {
        let path = format!("checks[{i}]");
        collision_pairs.push(CollisionPair {
            name: check.name.clone(),
            a: builder.body(&path, &check.a)?,
            b: builder.body(&path, &check.b)?,
            d_safe: check.d_safe,
        });
    }

    let n = chain.dof();
    let init = &mut file.initial;
    if init.q.is_empty() {
        init.q = vec![0.0; n];
    }
    if init.qdot.is_empty() {
        init.qdot = vec![0.0; n];
    }
    if init.q.len() != n || init.qdot.len() != n {
        return Err(err("initial", format!("q and qdot need {n} entries")));
    }
    finite(
        "initial",
        &[init.q.as_slice(), init.qdot.as_slice(), &[init.jitter]].concat(),
    )?;
    let mut q = DVector::from_column_slice(&init.q);
    if init.jitter > 0.0 {
        let mut rng = StdRng::seed_from_u64(file.seed);
        q.iter_mut()
            .for_each(|v| *v += rng.gen_range(-init.jitter..=init.jitter));
    }
    let initial =
        JointState::new(q, DVector::from_column_slice(&init.qdot)).map_err(|e| err("initial", e.to_string()))?;

    Ok(Scenario {
        file,
        chain,
        model,
        task,
        constraints,
        collision_pairs,
        initial,
    })
}
