mod common;

use approx::assert_relative_eq;
use nalgebra::{DMatrix, DVector, Isometry3};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use vfikit::control::*;
use vfikit::geometry::{Plane, Vec3};
use vfikit::kinematics::{
    forward_kinematics, jacobian_time_derivative, Attachment, JacobianKind, Joint, JointState, RobotPoint, SerialChain,
};
use vfikit::vfi::{build_rows, stack, ConstraintKind, ConstraintSpec, Order, VfiGains};

fn tip() -> RobotPoint {
    RobotPoint {
        frame: 0,
        local_point: Vec3::zeros(),
    }
}

/// Joint 0 about z swings the tip along y; joint 1 about x spins it in place. At `q = 0` the
/// y-distance Jacobian is exactly `[1, 0]`.
fn scalar_chain() -> SerialChain {
    let j0 = Joint::new("swing", Vec3::z(), Vec3::zeros(), -3.0, 3.0).unwrap();
    let j1 = Joint::new("spin", Vec3::x(), Vec3::zeros(), -3.0, 3.0).unwrap();
    let tip = Attachment {
        name: "tip".into(),
        joint: Some(1),
        pose: Isometry3::translation(1.0, 0.0, 0.0),
    };
    SerialChain::new(vec![j0, j1], Isometry3::identity(), vec![tip]).unwrap()
}

fn planar() -> SerialChain {
    let j0 = Joint::new("a", Vec3::z(), Vec3::zeros(), -3.0, 3.0).unwrap();
    let j1 = Joint::new("b", Vec3::z(), Vec3::new(0.6, 0.0, 0.0), -3.0, 3.0).unwrap();
    let tip = Attachment {
        name: "tip".into(),
        joint: Some(1),
        pose: Isometry3::translation(0.6, 0.0, 0.0),
    };
    SerialChain::new(vec![j0, j1], Isometry3::identity(), vec![tip]).unwrap()
}

fn y_task(target: f64) -> TaskSpec {
    TaskSpec::new(TaskKind::PointPlane {
        point: tip(),
        plane: Plane::new(Vec3::y(), 0.0).unwrap(),
        target,
    })
}

#[test]
fn unconstrained_step_is_damped_least_squares() {
    let out = velocity_step(
        &y_task(-0.5),
        &scalar_chain(),
        &[],
        &JointState::at_rest(DVector::zeros(2)),
    )
    .unwrap();
    assert_relative_eq!(out.u[0], -0.18 / (1.0 + 1e-4), epsilon = 1e-12);
    assert!((out.u[0] + 0.17998).abs() < 1e-5);
    assert!(out.u[1].abs() < 1e-14);

    let mut rng = StdRng::seed_from_u64(50);
    for _ in 0..50 {
        let n = rng.gen_range(1..=9);
        let chain = common::random_chain(&mut rng, n);
        let q = common::random_q(&mut rng, n, 3.0);
        let plane = Plane::through(&common::vec3(&mut rng, 1.0), &common::unit(&mut rng)).unwrap();
        let point = RobotPoint {
            frame: rng.gen_range(0..chain.attachments().len()),
            local_point: common::vec3(&mut rng, 0.3),
        };
        let task = TaskSpec::new(TaskKind::PointPlane {
            point,
            plane,
            target: 0.1,
        });
        let poses = forward_kinematics(&chain, &q).unwrap();
        let (xt, j) = task.evaluate(&poses).unwrap();
        let closed = -(j.transpose() * &j + DMatrix::identity(n, n) * 1e-4)
            .try_inverse()
            .unwrap()
            * j.transpose()
            * &xt
            * 0.36;
        let out = velocity_step(&task, &chain, &[], &JointState::at_rest(q)).unwrap();
        assert!((&out.u - &closed).amax() < 1e-9 * (1.0 + closed.amax()));
    }
}

#[test]
fn slack_rows_leave_the_solution_unchanged() {
    let chain = planar();
    let mut rng = StdRng::seed_from_u64(51);
    for _ in 0..50 {
        let q = common::random_q(&mut rng, 2, 2.0);
        let state = JointState::at_rest(q);
        let task = y_task(rng.gen_range(-1.0..1.0));
        let free = velocity_step(&task, &chain, &[], &state).unwrap();
        // A wall 10 m away cannot bind a 1.2 m arm.
        let far = Plane::new(Vec3::x(), -10.0).unwrap();
        let spec = ConstraintSpec::keep_out(
            "far",
            ConstraintKind::PointPlane {
                point: tip(),
                plane: far,
            },
            0.0,
            VfiGains::default(),
        )
        .unwrap();
        let with = velocity_step(&task, &chain, &[spec], &state).unwrap();
        assert!((&free.u - &with.u).amax() < 1e-12);
        assert!(with.slacks[0] > 0.0);
    }
}

#[test]
fn closed_loop_error_decays_exponentially() {
    let chain = planar();
    let task = y_task(0.3);
    let mut state = JointState::at_rest(DVector::from_vec(vec![-0.4, 0.9]));
    let dt = 1e-3;
    let error = |s: &JointState| task.evaluate(&forward_kinematics(&chain, &s.q).unwrap()).unwrap().0[0];
    let e0 = error(&state);
    for k in 1..=5000 {
        let out = velocity_step(&task, &chain, &[], &state).unwrap();
        state.q += &out.u * dt;
        let e = error(&state);
        let expected = e0 * (-0.36 * k as f64 * dt).exp();
        assert!((e - expected).abs() < 1e-2 * e0.abs(), "step {k}: {e} vs {expected}");
    }
}

/// `min ‖J u + β‖² + λ²‖u‖²` over `A u ≤ b` in two variables, by enumerating every active set
/// of size ≤ 2 and keeping the best feasible stationary point.
fn enumeration_oracle(
    j: &DMatrix<f64>,
    beta: &DVector<f64>,
    lambda: f64,
    a: &DMatrix<f64>,
    b: &DVector<f64>,
) -> DVector<f64> {
    let h = j.transpose() * j + DMatrix::identity(2, 2) * lambda * lambda;
    let g = j.transpose() * beta;
    let cost = |u: &DVector<f64>| (j * u + beta).norm_squared() + lambda * lambda * u.norm_squared();
    let feasible = |u: &DVector<f64>| (a * u - b).iter().all(|v| *v <= 1e-10);
    let mut sets: Vec<Vec<usize>> = vec![vec![]];
    for i in 0..a.nrows() {
        sets.push(vec![i]);
        for k in i + 1..a.nrows() {
            sets.push(vec![i, k]);
        }
    }
    let mut best: Option<(f64, DVector<f64>)> = None;
    for set in sets {
        let m = set.len();
        let mut kkt = DMatrix::zeros(2 + m, 2 + m);
        let mut rhs = DVector::zeros(2 + m);
        kkt.view_mut((0, 0), (2, 2)).copy_from(&h);
        rhs.rows_mut(0, 2).copy_from(&-&g);
        for (r, &i) in set.iter().enumerate() {
            kkt.view_mut((2 + r, 0), (1, 2)).copy_from(&a.row(i));
            kkt.view_mut((0, 2 + r), (2, 1)).copy_from(&a.row(i).transpose());
            rhs[2 + r] = b[i];
        }
        let Some(sol) = kkt.lu().solve(&rhs) else { continue };
        let u = sol.rows(0, 2).into_owned();
        if feasible(&u) && best.as_ref().is_none_or(|(c, _)| cost(&u) < *c) {
            best = Some((cost(&u), u));
        }
    }
    best.unwrap().1
}

#[test]
fn acceleration_step_matches_enumeration_oracle() {
    let chain = planar();
    let mut rng = StdRng::seed_from_u64(52);
    let mut binding = 0;
    for _ in 0..200 {
        let q = common::random_q(&mut rng, 2, 2.5);
        let qdot = common::random_q(&mut rng, 2, 1.0);
        let state = JointState::new(q.clone(), qdot.clone()).unwrap();
        let mut task = y_task(rng.gen_range(-1.0..1.0));
        task.g = BoundShape::NormPlusError { gain: 1.0 };
        let poses = forward_kinematics(&chain, &q).unwrap();
        let p = poses.point(0, &Vec3::zeros()).unwrap();
        let wall = Plane::through(
            &(p + common::unit(&mut rng) * rng.gen_range(0.0..0.3)),
            &common::unit(&mut rng),
        )
        .unwrap();
        let spec = ConstraintSpec::keep_out(
            "wall",
            ConstraintKind::PointPlane {
                point: tip(),
                plane: wall,
            },
            0.0,
            VfiGains::default(),
        )
        .unwrap();

        let kind = JacobianKind::PointPlaneDistance {
            frame: 0,
            local_point: Vec3::zeros(),
            plane: Plane::new(Vec3::y(), 0.0).unwrap(),
        };
        let j = poses.jacobian(&kind).unwrap().matrix;
        let jdot = jacobian_time_derivative(&chain, &q, &qdot, &kind).unwrap().matrix;
        let TaskKind::PointPlane { target, .. } = task.kind;
        let xt = poses.value(&kind).unwrap().add_scalar(-target);
        let beta = (&j * 1.5 + &jdot) * &qdot + &xt * 0.3;
        let g = (&j * &qdot).norm() + xt.norm();
        let rows = build_rows(&chain, &state, std::slice::from_ref(&spec), Order::Second).unwrap();
        let (w_mat, w) = stack(&rows, 2).unwrap();
        let mut a = DMatrix::zeros(5, 2);
        a.view_mut((0, 0), (2, 2)).fill_with_identity();
        a.view_mut((2, 0), (2, 2)).copy_from(&-DMatrix::<f64>::identity(2, 2));
        a.view_mut((4, 0), (1, 2)).copy_from(&w_mat);
        let b = DVector::from_vec(vec![
            2.0 * (g - qdot[0]),
            2.0 * (g - qdot[1]),
            2.0 * (g + qdot[0]),
            2.0 * (g + qdot[1]),
            w[0],
        ]);

        let out = acceleration_step(&task, &chain, &[spec], &state).unwrap();
        if out.fallback {
            continue;
        }
        let oracle = enumeration_oracle(&j, &beta, 0.01, &a, &b);
        assert!((&out.u - &oracle).amax() < 1e-5, "{} vs {}", out.u, oracle);
        if out.slacks[0] < 1e-9 {
            binding += 1;
        }
    }
    assert!(binding > 10, "only {binding} samples exercised the wall");
}
