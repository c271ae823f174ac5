//! Closed-loop simulation of a scenario.
//!
//! Velocity mode integrates `q ← q + u·dt`. Acceleration and torque modes use semi-implicit
//! Euler, `q̇ ← q̇ + q̈·dt` then `q ← q + q̇·dt`; in torque mode `q̈` comes from the forward
//! dynamics of the commanded torque.

pub mod collision;
pub mod log;
pub mod scenario;

use std::fmt;
use std::str::FromStr;
use std::time::Duration;

use nalgebra::DVector;

use crate::control::{torque_map, ControlOutput, Controller};
use crate::dynamics::forward_dynamics;
use crate::error::{Error, Result};
use crate::geometry::phi_from_metric;
use crate::kinematics::JointState;
use crate::qp::QpStatus;
use crate::vfi::{ConstraintKind, Direction};

pub use collision::{collision_check, CollisionReport};
pub use log::{StepLog, StepRecord, StepStatus};
pub use scenario::{load_scenario, serialize_scenario, Scenario};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ControlMode {
    Velocity,
    Acceleration,
    Torque,
}

/// `qp-*` enforces nothing; `cqp-*` enforces every constraint not explicitly disabled and, in
/// the dynamic modes, the acceleration bounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RunMode {
    pub constrained: bool,
    pub control: ControlMode,
}

impl RunMode {
    pub const fn new(constrained: bool, control: ControlMode) -> Self {
        Self { constrained, control }
    }
}

impl FromStr for RunMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let (kind, control) = s
            .split_once('-')
            .ok_or_else(|| format!("mode `{s}` is not of the form {{qp,cqp}}-{{velocity,acceleration,torque}}"))?;
        let constrained = match kind {
            "qp" => false,
            "cqp" => true,
            _ => return Err(format!("unknown controller `{kind}` (expected qp or cqp)")),
        };
        let control = match control {
            "velocity" => ControlMode::Velocity,
            "acceleration" => ControlMode::Acceleration,
            "torque" => ControlMode::Torque,
            _ => return Err(format!("unknown control mode `{control}`")),
        };
        Ok(Self { constrained, control })
    }
}

impl fmt::Display for RunMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = if self.constrained { "cqp" } else { "qp" };
        let control = match self.control {
            ControlMode::Velocity => "velocity",
            ControlMode::Acceleration => "acceleration",
            ControlMode::Torque => "torque",
        };
        write!(f, "{kind}-{control}")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CollisionEvent {
    pub step: usize,
    pub pair: String,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub log: StepLog,
    pub final_state: JointState,
    /// Every violation the collision checker found, over all logged states and the final one.
    pub collisions: Vec<CollisionEvent>,
}

pub struct Simulator<'a> {
    scenario: &'a Scenario,
    controller: Controller,
    mode: RunMode,
    state: JointState,
    dt: f64,
    step: usize,
    cone_rows: Vec<usize>,
}

impl<'a> Simulator<'a> {
    /// `disable` names constraints left unenforced in `cqp` modes.
    pub fn new(scenario: &'a Scenario, mode: RunMode, disable: &[String]) -> Result<Self> {
        let mut controller = Controller::new(scenario.task.clone(), scenario.constraints.clone())?;
        if !mode.constrained {
            controller = controller.unconstrained();
        }
        for name in disable {
            if !controller.disable(name) {
                return Err(Error::Scenario {
                    path: "disable".into(),
                    message: format!("no constraint named `{name}`"),
                });
            }
        }
        if mode.control == ControlMode::Torque && scenario.model.is_none() {
            return Err(Error::Scenario {
                path: "robot.joints".into(),
                message: "torque mode needs a link inertia on every joint".into(),
            });
        }
        let dt = match mode.control {
            ControlMode::Velocity => scenario.file.dt,
            _ => scenario.file.dynamic_dt,
        };
        let mut cone_rows = Vec::new();
        let mut row = 0;
        for spec in &scenario.constraints {
            if matches!(spec.kind, ConstraintKind::Cone { .. }) {
                cone_rows.push(row);
            }
            row += spec.row_count(scenario.chain.dof());
        }
        Ok(Self {
            scenario,
            controller,
            mode,
            state: scenario.initial.clone(),
            dt,
            step: 0,
            cone_rows,
        })
    }

    pub fn state(&self) -> &JointState {
        &self.state
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn time(&self) -> f64 {
        self.step as f64 * self.dt
    }

    pub fn empty_log(&self) -> StepLog {
        let n = self.scenario.chain.dof();
        let mut tags = Vec::new();
        let mut directions = Vec::new();
        let mut cones = Vec::new();
        for spec in &self.scenario.constraints {
            match spec.kind {
                ConstraintKind::JointLimits => {
                    tags.extend((0..n).map(|j| format!("{}[{j}]", spec.name)));
                    directions.extend(std::iter::repeat_n(Direction::KeepIn, n));
                }
                ConstraintKind::Cone { .. } => {
                    cones.push(spec.name.clone());
                    tags.push(spec.name.clone());
                    directions.push(Direction::KeepIn);
                }
                _ => {
                    tags.push(spec.name.clone());
                    directions.push(spec.direction);
                }
            }
        }
        StepLog {
            dof: n,
            constraint_tags: tags,
            directions,
            cone_names: cones,
            records: Vec::new(),
        }
    }

    fn control(&mut self) -> Result<ControlOutput> {
        let chain = &self.scenario.chain;
        match self.mode.control {
            ControlMode::Velocity => self.controller.velocity_step(chain, &self.state),
            ControlMode::Acceleration => self.controller.acceleration_step(chain, &self.state),
            ControlMode::Torque => {
                let model = self.scenario.model.as_ref().expect("checked in new");
                self.controller.torque_step(model, &self.state)
            }
        }
    }

    /// Computes the command at the current state, advances one step and returns the record
    /// of the state the command was computed at.
    pub fn step(&mut self) -> StepRecord {
        let n = self.scenario.chain.dof();
        let rows = self.scenario.constraints.iter().map(|s| s.row_count(n)).sum::<usize>();
        let (status, u, task_error, constraints, phi, elapsed, message) = match self.control() {
            Ok(out) => {
                let status = match out.status {
                    QpStatus::Optimal => StepStatus::Optimal,
                    QpStatus::Infeasible => StepStatus::Infeasible,
                    QpStatus::MaxIter => StepStatus::MaxIter,
                };
                let errors: Vec<f64> = out.rows.iter().map(|r| r.error).collect();
                let phi = self
                    .cone_rows
                    .iter()
                    .map(|&i| phi_from_metric(out.rows[i].value).unwrap_or(f64::NAN))
                    .collect();
                (status, out.u, out.task_error, errors, phi, out.elapsed, None)
            }
            Err(e) => {
                let u = self.fallback();
                let nan = vec![f64::NAN; rows];
                let phi = vec![f64::NAN; self.cone_rows.len()];
                (
                    StepStatus::Error,
                    u,
                    f64::NAN,
                    nan,
                    phi,
                    Duration::ZERO,
                    Some(e.to_string()),
                )
            }
        };
        let record = StepRecord {
            step: self.step,
            t: self.time(),
            status,
            task_error,
            q: self.state.q.clone(),
            qdot: self.state.qdot.clone(),
            u: u.clone(),
            constraints,
            phi,
            elapsed,
            message,
        };
        self.advance(&u);
        record
    }

    /// Command used when the controller fails outright: stop in velocity mode, damp with
    /// `q̈ = −k q̇` in the dynamic modes.
    fn fallback(&self) -> DVector<f64> {
        let damp = -&self.state.qdot * self.controller.task.k;
        match self.mode.control {
            ControlMode::Velocity => DVector::zeros(self.scenario.chain.dof()),
            ControlMode::Acceleration => damp,
            ControlMode::Torque => {
                let model = self.scenario.model.as_ref().expect("checked in new");
                torque_map(model, &self.state, &damp).unwrap_or_else(|_| DVector::zeros(model.dof()))
            }
        }
    }

    fn advance(&mut self, u: &DVector<f64>) {
        let dt = self.dt;
        match self.mode.control {
            ControlMode::Velocity => {
                self.state.q += u * dt;
                self.state.qdot = u.clone();
            }
            ControlMode::Acceleration => {
                self.state.qdot += u * dt;
                self.state.q += &self.state.qdot * dt;
                self.state.qddot = u.clone();
            }
            ControlMode::Torque => {
                let model = self.scenario.model.as_ref().expect("checked in new");
                let qddot = forward_dynamics(model, &self.state.q, &self.state.qdot, u)
                    .unwrap_or_else(|_| DVector::zeros(model.dof()));
                self.state.qdot += &qddot * dt;
                self.state.q += &self.state.qdot * dt;
                self.state.qddot = qddot;
            }
        }
        self.step += 1;
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunOptions {
    /// Overrides the scenario's step count.
    pub steps: Option<usize>,
    pub disable: Vec<String>,
}

pub fn run(scenario: &Scenario, mode: RunMode) -> Result<RunOutput> {
    run_with(scenario, mode, &RunOptions::default())
}

pub fn run_with(scenario: &Scenario, mode: RunMode, options: &RunOptions) -> Result<RunOutput> {
    let mut sim = Simulator::new(scenario, mode, &options.disable)?;
    let steps = options.steps.unwrap_or(scenario.file.steps);
    let mut log = sim.empty_log();
    log.records.reserve(steps);
    let mut collisions = Vec::new();
    let mut check = |step: usize, q: &DVector<f64>| -> Result<()> {
        let report = collision_check(&scenario.chain, q, &scenario.collision_pairs)?;
        collisions.extend(report.violations().map(|v| CollisionEvent {
            step,
            pair: v.name.clone(),
            distance: v.distance,
        }));
        Ok(())
    };
    for _ in 0..steps {
        let record = sim.step();
        check(record.step, &record.q)?;
        log.records.push(record);
    }
    if steps > 0 {
        check(steps, &sim.state().q)?;
    }
    Ok(RunOutput {
        log,
        final_state: sim.state().clone(),
        collisions,
    })
}
