//! Rigid-body dynamics of a revolute serial chain: `M(q) q̈ + n(q, q̇) = τ`.
//!
//! `M` comes from the composite-rigid-body algorithm and `n` from recursive Newton–Euler with
//! `q̈ = 0`. Both work directly with world-frame axes and origins from forward kinematics.

use nalgebra::{Cholesky, DMatrix, DVector, Matrix3};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::geometry::Vec3;
use crate::kinematics::{forward_kinematics, ChainPoses, SerialChain};

pub const STANDARD_GRAVITY: f64 = 9.81;

/// Inertial parameters of the link carried by one joint, in that joint's frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkInertia {
    pub mass: f64,
    pub com: Vec3,
    /// Rotational inertia about the center of mass.
    pub inertia: Matrix3<f64>,
}

impl LinkInertia {
    pub fn new(mass: f64, com: Vec3, inertia: Matrix3<f64>) -> Result<Self> {
        if !(mass > 0.0) || !mass.is_finite() {
            return Err(Error::InvalidModel(format!("link mass must be positive, got {mass}")));
        }
        if (inertia - inertia.transpose()).amax() > 1e-9 {
            return Err(Error::InvalidModel("inertia tensor is not symmetric".into()));
        }
        let min_eig = inertia.symmetric_eigenvalues().min();
        if !(min_eig > 1e-9) {
            return Err(Error::InvalidModel(format!(
                "inertia tensor is not positive definite (min eigenvalue {min_eig})"
            )));
        }
        Ok(Self { mass, com, inertia })
    }

    /// Uniform thin rod of the given mass running from the joint origin along `direction`
    /// for `length` meters. A small radial inertia keeps the tensor positive definite.
    pub fn uniform_rod(mass: f64, direction: &Vec3, length: f64) -> Result<Self> {
        let length = length.max(1e-3);
        let dir = if direction.norm() > 1e-12 {
            direction.normalize()
        } else {
            Vec3::z()
        };
        let radius = 0.02f64;
        let axial = 0.5 * mass * radius * radius;
        let transverse = mass * (3.0 * radius * radius + length * length) / 12.0;
        // I = transverse·(E − d dᵀ) + axial·d dᵀ
        let ddt = dir * dir.transpose();
        let inertia = (Matrix3::identity() - ddt) * transverse + ddt * axial;
        Self::new(mass, dir * (0.5 * length), inertia)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RigidBodyModel {
    pub chain: SerialChain,
    pub links: Vec<LinkInertia>,
    pub gravity: Vec3,
}

impl RigidBodyModel {
    pub fn new(chain: SerialChain, links: Vec<LinkInertia>, gravity: Vec3) -> Result<Self> {
        check_dim("link inertias", chain.dof(), links.len())?;
        Ok(Self { chain, links, gravity })
    }

    pub fn dof(&self) -> usize {
        self.chain.dof()
    }

    pub fn without_gravity(&self) -> Self {
        Self {
            gravity: Vec3::zeros(),
            ..self.clone()
        }
    }
}

struct LinkFrame {
    axis: Vec3,
    origin: Vec3,
    com: Vec3,
    inertia: Matrix3<f64>,
    mass: f64,
}

fn link_frames(model: &RigidBodyModel, poses: &ChainPoses) -> Vec<LinkFrame> {
    model
        .links
        .iter()
        .enumerate()
        .map(|(i, link)| {
            let pose = &poses.joints[i];
            let rot = pose.rotation.to_rotation_matrix();
            LinkFrame {
                axis: *poses.axis(i),
                origin: poses.origin(i),
                com: pose.translation.vector + rot * link.com,
                inertia: rot.matrix() * link.inertia * rot.matrix().transpose(),
                mass: link.mass,
            }
        })
        .collect()
}

fn skew_inertia(mass: f64, c: &Vec3) -> Matrix3<f64> {
    // m (‖c‖² E − c cᵀ): point-mass inertia about the origin
    (Matrix3::identity() * c.norm_squared() - c * c.transpose()) * mass
}

/// Joint-space inertia matrix by the composite-rigid-body algorithm.
pub fn mass_matrix(model: &RigidBodyModel, q: &DVector<f64>) -> Result<DMatrix<f64>> {
    let poses = forward_kinematics(&model.chain, q)?;
    let frames = link_frames(model, &poses);
    let n = model.dof();
    let mut m = DMatrix::zeros(n, n);

    // Composite of links j..n about the world origin.
    let mut mass = 0.0;
    let mut first_moment = Vec3::zeros();
    let mut inertia_o = Matrix3::zeros();
    for j in (0..n).rev() {
        let link = &frames[j];
        mass += link.mass;
        first_moment += link.com * link.mass;
        inertia_o += link.inertia + skew_inertia(link.mass, &link.com);

        // Unit rate about joint j: ω = a_j, velocity at the origin v₀ = o_j × a_j.
        let omega = link.axis;
        let v0 = link.origin.cross(&omega);
        let force = v0 * mass + omega.cross(&first_moment);
        let moment_o = inertia_o * omega + first_moment.cross(&v0);
        for i in 0..=j {
            let (ai, oi) = (&frames[i].axis, &frames[i].origin);
            let value = ai.dot(&moment_o) + oi.cross(ai).dot(&force);
            m[(i, j)] = value;
            m[(j, i)] = value;
        }
    }
    Ok(m)
}

/// Recursive Newton–Euler inverse dynamics: the torques realizing `q̈` at `(q, q̇)`.
pub fn inverse_dynamics(
    model: &RigidBodyModel,
    q: &DVector<f64>,
    qdot: &DVector<f64>,
    qddot: &DVector<f64>,
) -> Result<DVector<f64>> {
    let n = model.dof();
    check_dim("joint velocity", n, qdot.len())?;
    check_dim("joint acceleration", n, qddot.len())?;
    let poses = forward_kinematics(&model.chain, q)?;
    let frames = link_frames(model, &poses);

    // Forward pass. Gravity enters as an upward acceleration of the base.
    let mut omega = Vec3::zeros();
    let mut omega_dot = Vec3::zeros();
    let mut acc = -model.gravity;
    let mut prev_origin = model.chain.base().translation.vector;
    let mut forces = Vec::with_capacity(n);
    let mut moments = Vec::with_capacity(n);
    for (i, link) in frames.iter().enumerate() {
        let r = link.origin - prev_origin;
        acc += omega_dot.cross(&r) + omega.cross(&omega.cross(&r));
        let spin = link.axis * qdot[i];
        omega_dot += link.axis * qddot[i] + omega.cross(&spin);
        omega += spin;

        let rc = link.com - link.origin;
        let acc_com = acc + omega_dot.cross(&rc) + omega.cross(&omega.cross(&rc));
        forces.push(acc_com * link.mass);
        moments.push(link.inertia * omega_dot + omega.cross(&(link.inertia * omega)));
        prev_origin = link.origin;
    }

    // Backward pass: wrench transmitted through each joint, moments about the joint origin.
    let mut tau = DVector::zeros(n);
    let mut f_next = Vec3::zeros();
    let mut n_next = Vec3::zeros();
    let mut next_origin = Vec3::zeros();
    for i in (0..n).rev() {
        let link = &frames[i];
        let rc = link.com - link.origin;
        let f = forces[i] + f_next;
        let mut moment = moments[i] + rc.cross(&forces[i]) + n_next;
        if i + 1 < n {
            moment += (next_origin - link.origin).cross(&f_next);
        }
        tau[i] = link.axis.dot(&moment);
        f_next = f;
        n_next = moment;
        next_origin = link.origin;
    }
    Ok(tau)
}

/// Coriolis, centrifugal and gravity terms `n(q, q̇)`.
pub fn nonlinear_terms(model: &RigidBodyModel, q: &DVector<f64>, qdot: &DVector<f64>) -> Result<DVector<f64>> {
    inverse_dynamics(model, q, qdot, &DVector::zeros(model.dof()))
}

/// `q̈ = M⁻¹(τ − n)`, by Cholesky.
pub fn forward_dynamics(
    model: &RigidBodyModel,
    q: &DVector<f64>,
    qdot: &DVector<f64>,
    tau: &DVector<f64>,
) -> Result<DVector<f64>> {
    check_dim("joint torque", model.dof(), tau.len())?;
    let m = mass_matrix(model, q)?;
    let bias = nonlinear_terms(model, q, qdot)?;
    let chol = Cholesky::new(m).ok_or_else(|| Error::InvalidModel("mass matrix is not positive definite".into()))?;
    Ok(chol.solve(&(tau - bias)))
}

pub fn kinetic_energy(model: &RigidBodyModel, q: &DVector<f64>, qdot: &DVector<f64>) -> Result<f64> {
    check_dim("joint velocity", model.dof(), qdot.len())?;
    Ok(0.5 * qdot.dot(&(mass_matrix(model, q)? * qdot)))
}

/// Gravitational potential `−Σ mᵢ gᵀ cᵢ`.
pub fn potential_energy(model: &RigidBodyModel, q: &DVector<f64>) -> Result<f64> {
    let poses = forward_kinematics(&model.chain, q)?;
    Ok(link_frames(model, &poses)
        .iter()
        .map(|l| -l.mass * model.gravity.dot(&l.com))
        .sum())
}
