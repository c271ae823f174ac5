mod common;

use approx::assert_relative_eq;
use nalgebra::DVector;

use vfikit::error::Error;
use vfikit::sim::*;

const ARM: &str = r#"
version = 1

[robot]

[[robot.joints]]
name = "j"
axis = [0, 0, 1]
lower = -1
upper = 1
link = { mass = 1.0, rod = [0.5, 0, 0] }

[[robot.frames]]
name = "tip"
joint = "j"
translation = [0.5, 0, 0]

[[primitives]]
type = "point"
name = "p"
frame = "tip"
position = [0, 0, 0]

[[primitives]]
type = "plane"
name = "wall"
point = [0, 0.2, 0]
normal = [0, -1, 0]

[task]
kind = "point_plane"
robot = "p"
plane = "wall"
"#;

fn arm(extra: &str) -> Scenario {
    load_scenario(&format!("{ARM}{extra}")).unwrap()
}

const VELOCITY: RunMode = RunMode::new(true, ControlMode::Velocity);
const ACCELERATION: RunMode = RunMode::new(true, ControlMode::Acceleration);
const TORQUE: RunMode = RunMode::new(true, ControlMode::Torque);

#[test]
fn minimal_scenario_gets_defaults() {
    let s = arm("");
    assert_eq!(s.chain.dof(), 1);
    assert_eq!((s.task.eta, s.task.lambda), (0.36, 0.01));
    assert_eq!((s.task.kd, s.task.kp, s.task.k), (1.5, 0.3, 2.0));
    assert_eq!((s.file.dt, s.file.dynamic_dt, s.file.steps), (0.01, 0.001, 3000));
    assert_eq!(s.initial.q, DVector::zeros(1));
    assert!(s.model.is_some());
    assert!(s.constraints.is_empty());
}

#[test]
fn missing_section_is_named() {
    let without_robot: String = ARM
        .split("[[primitives]]")
        .enumerate()
        .map(|(i, part)| {
            if i == 0 {
                "version = 1\n".to_string()
            } else {
                format!("[[primitives]]{part}")
            }
        })
        .collect();
    match load_scenario(&without_robot) {
        Err(Error::Scenario { path, .. }) => assert_eq!(path, "robot"),
        other => panic!("expected a scenario error, got {other:?}"),
    }
}

#[test]
fn duplicate_frames_are_rejected() {
    let text = ARM.replacen(
        "[[primitives]]",
        "[[robot.frames]]\nname = \"tip\"\n\n[[primitives]]",
        1,
    );
    match load_scenario(&text) {
        Err(Error::Scenario { path, .. }) => assert_eq!(path, "robot.frames[1]"),
        other => panic!("expected a scenario error, got {other:?}"),
    }
}

#[test]
fn unknown_keys_are_rejected() {
    let text = ARM.replace("[task]", "[task]\nspeed = 2");
    assert!(matches!(load_scenario(&text), Err(Error::Parse(_))));
    assert!(matches!(
        load_scenario(&format!("colour = 1\n{ARM}")),
        Err(Error::Parse(_))
    ));
}

#[test]
fn scenarios_round_trip() {
    for s in [arm(""), common::desk()] {
        let text = serialize_scenario(&s).unwrap();
        assert_eq!(load_scenario(&text).unwrap(), s);
    }
}

#[test]
fn jitter_is_seeded() {
    let a = arm("\n[initial]\njitter = 0.05\n");
    let b = arm("\n[initial]\njitter = 0.05\n");
    let c = load_scenario(&format!("seed = 7\n{ARM}\n[initial]\njitter = 0.05\n")).unwrap();
    assert_eq!(a.initial, b.initial);
    assert_ne!(a.initial.q, c.initial.q);
    assert!(a.initial.q[0].abs() <= 0.05);
}

#[test]
fn unknown_disable_name_is_an_error() {
    let s = common::desk();
    assert!(Simulator::new(&s, VELOCITY, &["nope".to_string()]).is_err());
    assert!(Simulator::new(&s, VELOCITY, &["cup-cone".to_string()]).is_ok());
}

#[test]
fn zero_command_leaves_state_unchanged() {
    // The tip already sits at its target distance, so x̃ = 0 and the command is exactly zero.
    let s = load_scenario(&ARM.replace("plane = \"wall\"\n", "plane = \"wall\"\ntarget = 0.2\n")).unwrap();
    for mode in [VELOCITY, ACCELERATION, TORQUE] {
        let mut sim = Simulator::new(&s, mode, &[]).unwrap();
        let before = sim.state().clone();
        let record = sim.step();
        assert_eq!(record.u, DVector::zeros(1), "{mode}");
        if mode.control == ControlMode::Torque {
            continue;
        }
        assert_eq!(sim.state().q, before.q, "{mode}");
        assert_eq!(sim.state().qdot, before.qdot, "{mode}");
    }
}

#[test]
fn semi_implicit_euler_update() {
    // Task point on the base: J = 0, the bounds collapse and q̈ = −k q̇ exactly.
    let text = ARM
        .replace("frame = \"tip\"\nposition", "frame = \"root\"\nposition")
        .replacen(
            "[[primitives]]",
            "[[robot.frames]]\nname = \"root\"\n\n[[primitives]]",
            1,
        );
    let s = load_scenario(&format!("{text}\n[initial]\nqdot = [0.4]\n")).unwrap();
    let mut sim = Simulator::new(&s, ACCELERATION, &[]).unwrap();
    let dt = sim.dt();
    let record = sim.step();
    let a = -2.0 * 0.4;
    assert_relative_eq!(record.u[0], a, epsilon = 1e-12);
    assert_relative_eq!(sim.state().qdot[0], 0.4 + a * dt, epsilon = 1e-15);
    assert_relative_eq!(sim.state().q[0], (0.4 + a * dt) * dt, epsilon = 1e-15);
}

#[test]
fn zero_steps_gives_empty_log() {
    let s = common::desk();
    let out = run_with(
        &s,
        VELOCITY,
        &RunOptions {
            steps: Some(0),
            ..Default::default()
        },
    )
    .unwrap();
    assert!(out.log.is_empty());
    assert_eq!(out.final_state, s.initial);
    assert!(out.collisions.is_empty());
    assert_eq!(out.log.to_csv(false).lines().count(), 1);
}

#[test]
fn logs_are_deterministic() {
    let s = common::desk();
    let opts = RunOptions {
        steps: Some(300),
        ..Default::default()
    };
    for mode in [VELOCITY, ACCELERATION] {
        let a = run_with(&s, mode, &opts).unwrap().log.to_csv(false);
        let b = run_with(&s, mode, &opts).unwrap().log.to_csv(false);
        assert_eq!(a, b);
    }
}

#[test]
fn torque_mode_tracks_acceleration_mode() {
    let s = common::desk();
    let opts = RunOptions {
        steps: Some(100),
        ..Default::default()
    };
    let acc = run_with(&s, ACCELERATION, &opts).unwrap();
    let tau = run_with(&s, TORQUE, &opts).unwrap();
    for (a, t) in acc.log.records.iter().zip(&tau.log.records) {
        assert!((&a.q - &t.q).amax() < 1e-8, "step {}", a.step);
    }
}

#[test]
fn constrained_velocity_run_is_clean() {
    let s = common::desk();
    let out = run(&s, VELOCITY).unwrap();
    assert!(out.collisions.is_empty());
    assert!(out.log.constraint_breaches(1e-6).is_empty());
    assert_eq!(out.log.non_optimal_steps(), 0);
    assert!(out.log.final_task_error().unwrap() < 1e-2);
}

#[test]
fn overlapping_check_pair_is_reported() {
    let extra = r#"
[[primitives]]
type = "sphere"
name = "knob"
frame = "tip"
center = [0, 0, 0]
radius = 0.05

[[primitives]]
type = "sphere"
name = "post"
center = [0.5, 0.05, 0]
radius = 0.05

[[checks]]
name = "knob-post"
a = "knob"
b = "post"
d_safe = 0
"#;
    let s = arm(extra);
    let report = collision_check(&s.chain, &s.initial.q, &s.collision_pairs).unwrap();
    let pair = report.pairs.iter().find(|p| p.name == "knob-post").unwrap();
    assert_relative_eq!(pair.distance, -0.05, epsilon = 1e-12);
    assert!(!report.is_clear());
    let out = run_with(
        &s,
        VELOCITY,
        &RunOptions {
            steps: Some(1),
            ..Default::default()
        },
    )
    .unwrap();
    assert_eq!(out.collisions[0].pair, "knob-post");
}
