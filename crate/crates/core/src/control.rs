//! Task-space controllers built on the constrained QP.
//!
//! Velocity mode minimises `‖J q̇ + η x̃‖² + λ²‖q̇‖²` subject to `W q̇ ≤ w`.
//! Acceleration mode minimises `‖J q̈ + β‖² + λ²‖q̈‖²`, `β = (k_d J + J̇) q̇ + k_p x̃`, subject to
//! `γ_l ≤ q̈ ≤ γ_u` and the second-order rows. Torque mode maps that acceleration through
//! `τ = n(q, q̇) + M(q) q̈`.

use std::time::Duration;

use nalgebra::{DMatrix, DVector};

use crate::dynamics::{mass_matrix, nonlinear_terms, RigidBodyModel};
use crate::error::{check_dim, Error, Result};
use crate::geometry::Plane;
use crate::kinematics::{
    forward_kinematics, jacobian_time_derivative, ChainPoses, JacobianKind, JointState, RobotPoint, SerialChain,
};
use crate::qp::{QpProblem, QpSolver, QpStatus};
use crate::vfi::{build_rows, stack, ConstraintRow, ConstraintSpec, Order};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TaskKind {
    /// Signed distance of a robot point to a plane, driven to `target`.
    PointPlane {
        point: RobotPoint,
        plane: Plane,
        target: f64,
    },
}

/// Shape `g(ẋ̃)` of the acceleration bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BoundShape {
    /// `‖ẋ̃‖`.
    Norm,
    /// `‖ẋ̃‖ + gain·‖x̃‖`, which lets a robot at rest start moving.
    NormPlusError { gain: f64 },
}

impl BoundShape {
    pub fn eval(&self, xtilde_dot: &DVector<f64>, xtilde: &DVector<f64>) -> f64 {
        match *self {
            BoundShape::Norm => xtilde_dot.norm(),
            BoundShape::NormPlusError { gain } => xtilde_dot.norm() + gain * xtilde.norm(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaskSpec {
    pub kind: TaskKind,
    /// Velocity-mode convergence gain (1/s).
    pub eta: f64,
    /// Damping.
    pub lambda: f64,
    pub kd: f64,
    pub kp: f64,
    /// Acceleration-bound scale (1/s).
    pub k: f64,
    pub g: BoundShape,
}

impl TaskSpec {
    /// Task with the default gains `η = 0.36`, `λ = 0.01`, `k_d = 1.5`, `k_p = 0.3`, `k = 2`.
    pub fn new(kind: TaskKind) -> Self {
        Self {
            kind,
            eta: 0.36,
            lambda: 0.01,
            kd: 1.5,
            kp: 0.3,
            k: 2.0,
            g: BoundShape::Norm,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64, what: &str| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidModel(format!(
                    "{what} must be positive and finite, got {v}"
                )))
            }
        };
        positive(self.eta, "task gain eta")?;
        positive(self.lambda, "damping lambda")?;
        positive(self.kd, "kd")?;
        positive(self.kp, "kp")?;
        if !(self.kd * self.kd - 4.0 * self.kp > 0.0) {
            return Err(Error::InvalidModel(format!(
                "kd^2 - 4 kp must be positive for a non-oscillatory decay (kd = {}, kp = {})",
                self.kd, self.kp
            )));
        }
        if !(self.k >= 0.0) || !self.k.is_finite() {
            return Err(Error::InvalidModel(format!(
                "bound scale k must be non-negative, got {}",
                self.k
            )));
        }
        if let BoundShape::NormPlusError { gain } = self.g {
            if !(gain >= 0.0) || !gain.is_finite() {
                return Err(Error::InvalidModel(format!(
                    "bound error gain must be non-negative, got {gain}"
                )));
            }
        }
        Ok(())
    }

    fn jacobian_kind(&self) -> JacobianKind {
        match self.kind {
            TaskKind::PointPlane { point, plane, .. } => JacobianKind::PointPlaneDistance {
                frame: point.frame,
                local_point: point.local_point,
                plane,
            },
        }
    }

    /// `(x̃, J)` at the given poses.
    pub fn evaluate(&self, poses: &ChainPoses) -> Result<(DVector<f64>, DMatrix<f64>)> {
        let kind = self.jacobian_kind();
        let TaskKind::PointPlane { target, .. } = self.kind;
        let x = poses.value(&kind)?;
        Ok((x.add_scalar(-target), poses.jacobian(&kind)?.matrix))
    }

    /// `J̇` along the current joint velocity.
    pub fn jacobian_derivative(&self, chain: &SerialChain, state: &JointState) -> Result<DMatrix<f64>> {
        Ok(jacobian_time_derivative(chain, &state.q, &state.qdot, &self.jacobian_kind())?.matrix)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControlOutput {
    /// `q̇`, `q̈` or `τ`, depending on the mode.
    pub u: DVector<f64>,
    /// The commanded acceleration behind a torque command.
    pub acceleration: Option<DVector<f64>>,
    pub status: QpStatus,
    /// Set when the QP failed and the fallback command was used.
    pub fallback: bool,
    /// `‖x̃‖`.
    pub task_error: f64,
    /// Every constraint row at this step, enforced or not.
    pub rows: Vec<ConstraintRow>,
    /// `rhs − J u` for each row, in the same order.
    pub slacks: Vec<f64>,
    pub iterations: usize,
    pub elapsed: Duration,
}

/// `γ_l = k(−g·1 − q̇)`, `γ_u = k(g·1 − q̇)`.
pub fn acceleration_bounds(
    task: &TaskSpec,
    qdot: &DVector<f64>,
    xtilde_dot: &DVector<f64>,
    xtilde: &DVector<f64>,
) -> (DVector<f64>, DVector<f64>) {
    let g = task.g.eval(xtilde_dot, xtilde);
    let lower = qdot.map(|v| task.k * (-g - v));
    let upper = qdot.map(|v| task.k * (g - v));
    (lower, upper)
}

/// Controller state: the task, every constraint spec, which of them are enforced, and the
/// solver workspace. Rows of unenforced specs are still evaluated so they can be logged.
#[derive(Debug, Clone)]
pub struct Controller {
    pub task: TaskSpec,
    pub constraints: Vec<ConstraintSpec>,
    pub enforced: Vec<bool>,
    /// Whether acceleration mode adds the `γ` bounds.
    pub acceleration_bounds: bool,
    solver: QpSolver,
}

impl Controller {
    /// A controller that enforces all `constraints` and the acceleration bounds.
    pub fn new(task: TaskSpec, constraints: Vec<ConstraintSpec>) -> Result<Self> {
        task.validate()?;
        let enforced = vec![true; constraints.len()];
        Ok(Self {
            task,
            constraints,
            enforced,
            acceleration_bounds: true,
            solver: QpSolver::new(),
        })
    }

    /// Keeps the constraints for logging but enforces none of them, and drops the bounds.
    pub fn unconstrained(mut self) -> Self {
        self.enforced.iter_mut().for_each(|e| *e = false);
        self.acceleration_bounds = false;
        self
    }

    /// Stops enforcing the named constraint; returns whether it exists.
    pub fn disable(&mut self, name: &str) -> bool {
        let mut found = false;
        for (spec, on) in self.constraints.iter().zip(self.enforced.iter_mut()) {
            if spec.name == name {
                *on = false;
                found = true;
            }
        }
        found
    }

    fn rows(&self, chain: &SerialChain, state: &JointState, order: Order) -> Result<(Vec<ConstraintRow>, Vec<bool>)> {
        let rows = build_rows(chain, state, &self.constraints, order)?;
        let mut mask = Vec::with_capacity(rows.len());
        for (spec, &on) in self.constraints.iter().zip(&self.enforced) {
            mask.extend(std::iter::repeat_n(on, spec.row_count(chain.dof())));
        }
        Ok((rows, mask))
    }

    pub fn velocity_step(&mut self, chain: &SerialChain, state: &JointState) -> Result<ControlOutput> {
        let start = Stopwatch::start();
        state.validate(chain)?;
        let n = chain.dof();
        let poses = forward_kinematics(chain, &state.q)?;
        let (xt, j) = self.task.evaluate(&poses)?;
        let (rows, mask) = self.rows(chain, state, Order::First)?;
        let enforced: Vec<ConstraintRow> = select(&rows, &mask);
        let (a, b) = stack(&enforced, n)?;

        let h = damped_hessian(&j, self.task.lambda);
        let f = j.transpose() * &xt * (2.0 * self.task.eta);
        let problem = QpProblem::new(h, f, a, b)?;
        let sol = self.solver.solve(&problem);
        let fallback = !sol.is_optimal();
        let u = if fallback { DVector::zeros(n) } else { sol.x };
        Ok(finish(
            u,
            None,
            sol.status,
            fallback,
            xt.norm(),
            rows,
            sol.iterations,
            start,
        ))
    }

    /// Returns `q̈`.
    pub fn acceleration_step(&mut self, chain: &SerialChain, state: &JointState) -> Result<ControlOutput> {
        let start = Stopwatch::start();
        state.validate(chain)?;
        let n = chain.dof();
        let poses = forward_kinematics(chain, &state.q)?;
        let (xt, j) = self.task.evaluate(&poses)?;
        let jdot = self.task.jacobian_derivative(chain, state)?;
        let xt_dot = &j * &state.qdot;
        let beta = (&j * self.task.kd + &jdot) * &state.qdot + &xt * self.task.kp;
        let (rows, mask) = self.rows(chain, state, Order::Second)?;
        let enforced = select(&rows, &mask);
        let (w_mat, w) = stack(&enforced, n)?;
        let (lower, upper) = acceleration_bounds(&self.task, &state.qdot, &xt_dot, &xt);

        let (a, b) = if self.acceleration_bounds {
            let l = w_mat.nrows();
            let mut a = DMatrix::zeros(2 * n + l, n);
            a.view_mut((0, 0), (n, n)).fill_with_identity();
            a.view_mut((n, 0), (n, n)).copy_from(&-DMatrix::<f64>::identity(n, n));
            a.view_mut((2 * n, 0), (l, n)).copy_from(&w_mat);
            let mut b = DVector::zeros(2 * n + l);
            b.rows_mut(0, n).copy_from(&upper);
            b.rows_mut(n, n).copy_from(&-&lower);
            b.rows_mut(2 * n, l).copy_from(&w);
            (a, b)
        } else {
            (w_mat, w)
        };

        let h = damped_hessian(&j, self.task.lambda);
        let f = j.transpose() * &beta * 2.0;
        let problem = QpProblem::new(h, f, a, b)?;
        let sol = self.solver.solve(&problem);
        let fallback = !sol.is_optimal();
        let u = if !fallback {
            sol.x
        } else if self.acceleration_bounds {
            // Midpoint of the bounds, −k q̇, which is the collapsed value when g = 0.
            (lower + upper) * 0.5
        } else {
            DVector::zeros(n)
        };
        Ok(finish(
            u,
            None,
            sol.status,
            fallback,
            xt.norm(),
            rows,
            sol.iterations,
            start,
        ))
    }

    /// Returns `τ = n + M q̈` with `q̈` from [`Controller::acceleration_step`].
    pub fn torque_step(&mut self, model: &RigidBodyModel, state: &JointState) -> Result<ControlOutput> {
        let start = Stopwatch::start();
        let mut out = self.acceleration_step(&model.chain, state)?;
        let tau = torque_map(model, state, &out.u)?;
        let ua = std::mem::replace(&mut out.u, tau);
        out.acceleration = Some(ua);
        out.elapsed = start.elapsed();
        Ok(out)
    }
}

/// `τ = n(q, q̇) + M(q) u_a`.
pub fn torque_map(model: &RigidBodyModel, state: &JointState, ua: &DVector<f64>) -> Result<DVector<f64>> {
    check_dim("commanded acceleration", model.dof(), ua.len())?;
    Ok(nonlinear_terms(model, &state.q, &state.qdot)? + mass_matrix(model, &state.q)? * ua)
}

/// Wall-clock timer. `wasm32-unknown-unknown` has no clock, so it reads zero there.
#[derive(Clone, Copy)]
struct Stopwatch(#[cfg(not(all(target_arch = "wasm32", target_os = "unknown")))] std::time::Instant);

impl Stopwatch {
    fn start() -> Self {
        #[cfg(not(all(target_arch = "wasm32", target_os = "unknown")))]
        return Stopwatch(std::time::Instant::now());
        #[cfg(all(target_arch = "wasm32", target_os = "unknown"))]
        return Stopwatch();
    }

    fn elapsed(self) -> Duration {
        #[cfg(not(all(target_arch = "wasm32", target_os = "unknown")))]
        return self.0.elapsed();
        #[cfg(all(target_arch = "wasm32", target_os = "unknown"))]
        return Duration::ZERO;
    }
}

fn damped_hessian(j: &DMatrix<f64>, lambda: f64) -> DMatrix<f64> {
    let n = j.ncols();
    let h = (j.transpose() * j + DMatrix::identity(n, n) * (lambda * lambda)) * 2.0;
    // Exact symmetry for the QP's check.
    (&h + h.transpose()) * 0.5
}

fn select(rows: &[ConstraintRow], mask: &[bool]) -> Vec<ConstraintRow> {
    rows.iter()
        .zip(mask)
        .filter(|(_, &on)| on)
        .map(|(r, _)| r.clone())
        .collect()
}

#[allow(clippy::too_many_arguments)]
fn finish(
    u: DVector<f64>,
    acceleration: Option<DVector<f64>>,
    status: QpStatus,
    fallback: bool,
    task_error: f64,
    rows: Vec<ConstraintRow>,
    iterations: usize,
    start: Stopwatch,
) -> ControlOutput {
    let slacks = rows.iter().map(|r| r.slack(&u)).collect();
    ControlOutput {
        u,
        acceleration,
        status,
        fallback,
        task_error,
        rows,
        slacks,
        iterations,
        elapsed: start.elapsed(),
    }
}

pub fn velocity_step(
    task: &TaskSpec,
    chain: &SerialChain,
    constraints: &[ConstraintSpec],
    state: &JointState,
) -> Result<ControlOutput> {
    Controller::new(task.clone(), constraints.to_vec())?.velocity_step(chain, state)
}

pub fn acceleration_step(
    task: &TaskSpec,
    chain: &SerialChain,
    constraints: &[ConstraintSpec],
    state: &JointState,
) -> Result<ControlOutput> {
    Controller::new(task.clone(), constraints.to_vec())?.acceleration_step(chain, state)
}

pub fn torque_step(
    task: &TaskSpec,
    model: &RigidBodyModel,
    constraints: &[ConstraintSpec],
    state: &JointState,
) -> Result<ControlOutput> {
    Controller::new(task.clone(), constraints.to_vec())?.torque_step(model, state)
}
