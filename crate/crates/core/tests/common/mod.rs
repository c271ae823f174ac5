//! Shared oracles and generators for the integration tests.
#![allow(dead_code)]

use std::path::PathBuf;

use nalgebra::{DMatrix, DVector, Isometry3, Matrix3, Rotation3, Translation3, UnitQuaternion};
use rand::rngs::StdRng;
use rand::Rng;

use vfikit::dynamics::{LinkInertia, RigidBodyModel};
use vfikit::geometry::{line_through, Plane, Vec3};
use vfikit::kinematics::{forward_kinematics, Attachment, JacobianKind, Joint, RobotLine, SerialChain};
use vfikit::qp::QpProblem;
use vfikit::sim::{load_scenario, Scenario};

pub fn desk_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("scenarios/desk_cup.toml")
}

pub fn desk() -> Scenario {
    load_scenario(&std::fs::read_to_string(desk_path()).unwrap()).unwrap()
}

pub fn unit(rng: &mut StdRng) -> Vec3 {
    loop {
        let v = Vec3::new(
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        );
        let n = v.norm();
        if n > 0.1 && n <= 1.0 {
            return v / n;
        }
    }
}

pub fn vec3(rng: &mut StdRng, r: f64) -> Vec3 {
    Vec3::new(rng.gen_range(-r..r), rng.gen_range(-r..r), rng.gen_range(-r..r))
}

pub fn pose(rng: &mut StdRng) -> Isometry3<f64> {
    Isometry3::from_parts(
        Translation3::from(vec3(rng, 0.3)),
        UnitQuaternion::from_scaled_axis(vec3(rng, 3.0)),
    )
}

/// A chain with `n` random joints and one random attachment per joint plus one on the base.
pub fn random_chain(rng: &mut StdRng, n: usize) -> SerialChain {
    let joints = (0..n)
        .map(|i| Joint::new(format!("j{i}"), unit(rng), vec3(rng, 0.3), -3.1, 3.1).unwrap())
        .collect();
    let mut attachments: Vec<Attachment> = (0..n)
        .map(|i| Attachment {
            name: format!("f{i}"),
            joint: Some(i),
            pose: pose(rng),
        })
        .collect();
    attachments.push(Attachment {
        name: "base".into(),
        joint: None,
        pose: pose(rng),
    });
    SerialChain::new(joints, pose(rng), attachments).unwrap()
}

pub fn random_q(rng: &mut StdRng, n: usize, r: f64) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.gen_range(-r..r))
}

pub fn random_model(rng: &mut StdRng, n: usize) -> RigidBodyModel {
    let chain = random_chain(rng, n);
    let links = (0..n)
        .map(|_| {
            let rot = Rotation3::from_scaled_axis(vec3(rng, 3.0));
            let d = Matrix3::from_diagonal(&Vec3::new(
                rng.gen_range(0.01..0.1),
                rng.gen_range(0.01..0.1),
                rng.gen_range(0.01..0.1),
            ));
            let inertia = rot.matrix() * d * rot.matrix().transpose();
            let inertia = (inertia + inertia.transpose()) * 0.5;
            LinkInertia::new(rng.gen_range(0.5..2.0), vec3(rng, 0.2), inertia).unwrap()
        })
        .collect();
    RigidBodyModel::new(chain, links, Vec3::new(0.0, 0.0, -9.81)).unwrap()
}

pub const KIND_NAMES: [&str; 6] = ["point", "line", "line-angle", "point-line", "point-plane", "line-line"];

/// A random Jacobian kind of family `which` on `chain` at `q`, or `None` when the sample is
/// too close to a singular configuration of that distance (coincident or parallel lines).
pub fn random_kind(rng: &mut StdRng, chain: &SerialChain, q: &DVector<f64>, which: usize) -> Option<JacobianKind> {
    let frame = rng.gen_range(0..chain.attachments().len());
    let local_point = vec3(rng, 0.3);
    let local_axis = unit(rng);
    let static_line = line_through(&vec3(rng, 1.0), &unit(rng)).unwrap();
    let poses = forward_kinematics(chain, q).unwrap();
    let kind = match which {
        0 => JacobianKind::Point { frame, local_point },
        1 => JacobianKind::Line {
            frame,
            local_axis,
            local_point,
        },
        2 => JacobianKind::LineAngle {
            frame,
            local_axis,
            local_point,
            static_line,
        },
        3 => JacobianKind::PointLineDistance {
            frame,
            local_point,
            static_line,
        },
        4 => JacobianKind::PointPlaneDistance {
            frame,
            local_point,
            plane: Plane::through(&vec3(rng, 1.0), &unit(rng)).unwrap(),
        },
        _ => JacobianKind::LineLineDistance {
            frame,
            local_axis,
            local_point,
            static_line,
        },
    };
    let d = poses.value(&kind).unwrap()[0];
    match which {
        3 if d < 1e-2 => None,
        5 => {
            let l = poses.direction(frame, &local_axis).unwrap();
            let sin = l.cross(static_line.direction()).norm();
            (sin > 1e-2 && d > 1e-2).then_some(kind)
        }
        _ => Some(kind),
    }
}

/// The two robot-line kinds used by self-collision rows.
pub fn random_relative_kind(
    rng: &mut StdRng,
    chain: &SerialChain,
    q: &DVector<f64>,
    line_line: bool,
) -> Option<JacobianKind> {
    let frames = chain.attachments().len();
    let robot_line = |rng: &mut StdRng| RobotLine {
        frame: rng.gen_range(0..frames),
        local_axis: unit(rng),
        local_point: vec3(rng, 0.3),
    };
    let poses = forward_kinematics(chain, q).unwrap();
    let kind = if line_line {
        JacobianKind::LineRobotLineDistance {
            line: robot_line(rng),
            other: robot_line(rng),
        }
    } else {
        JacobianKind::PointRobotLineDistance {
            frame: rng.gen_range(0..frames),
            local_point: vec3(rng, 0.3),
            line: robot_line(rng),
        }
    };
    let d = poses.value(&kind).unwrap()[0];
    if let JacobianKind::LineRobotLineDistance { line, other } = &kind {
        let a = poses.direction(line.frame, &line.local_axis).unwrap();
        let b = poses.direction(other.frame, &other.local_axis).unwrap();
        if a.cross(&b).norm() < 1e-2 {
            return None;
        }
    }
    (d > 1e-2).then_some(kind)
}

/// Central-difference Jacobian of `kind`'s value in `q`.
pub fn fd_jacobian(chain: &SerialChain, q: &DVector<f64>, kind: &JacobianKind, h: f64) -> DMatrix<f64> {
    let n = q.len();
    let rows = forward_kinematics(chain, q).unwrap().value(kind).unwrap().len();
    let mut j = DMatrix::zeros(rows, n);
    for i in 0..n {
        let mut qp = q.clone();
        let mut qm = q.clone();
        qp[i] += h;
        qm[i] -= h;
        let vp = forward_kinematics(chain, &qp).unwrap().value(kind).unwrap();
        let vm = forward_kinematics(chain, &qm).unwrap().value(kind).unwrap();
        j.set_column(i, &((vp - vm) / (2.0 * h)));
    }
    j
}

/// Largest violation of `|a − b| ≤ max(rel·|b|, abs)` over entries; ≤ 0 means agreement.
pub fn entrywise_excess(a: &DMatrix<f64>, b: &DMatrix<f64>, rel: f64, abs: f64) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).abs() - (rel * y.abs()).max(abs))
        .fold(f64::NEG_INFINITY, f64::max)
}

/// A strictly convex QP with eigenvalues of `H` in `[0.5, 5]`, feasible by construction.
pub fn random_qp(rng: &mut StdRng, n: usize, l: usize) -> QpProblem {
    let q = nalgebra::linalg::QR::new(DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0))).q();
    let d = DMatrix::from_diagonal(&DVector::from_fn(n, |_, _| rng.gen_range(0.5..5.0)));
    let h = &q * d * q.transpose();
    let h = (&h + h.transpose()) * 0.5;
    let f = DVector::from_fn(n, |_, _| rng.gen_range(-3.0..3.0));
    let a = DMatrix::from_fn(l, n, |_, _| rng.gen_range(-1.0..1.0));
    let x0 = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
    let slack = DVector::from_fn(l, |_, _| {
        if rng.gen_bool(0.3) {
            0.0
        } else {
            rng.gen_range(0.0..0.5)
        }
    });
    let b = &a * x0 + slack;
    QpProblem::new(h, f, a, b).unwrap()
}

/// Projected-gradient oracle: FISTA with adaptive restart on the dual
/// `min_{μ ≥ 0} ½(f + Aᵀμ)ᵀH⁻¹(f + Aᵀμ) + bᵀμ`, with `x(μ) = −H⁻¹(f + Aᵀμ)`.
pub fn projected_gradient_qp(p: &QpProblem, max_iter: usize) -> DVector<f64> {
    let hinv = p.h().clone().cholesky().unwrap().inverse();
    let a = p.a();
    let l = a.nrows();
    let x_of = |mu: &DVector<f64>| -(&hinv * (p.f() + a.transpose() * mu));
    if l == 0 {
        return x_of(&DVector::zeros(0));
    }
    let q = a * &hinv * a.transpose();
    let lip = q.symmetric_eigenvalues().max().max(1e-12);
    let c = a * &hinv * p.f();
    // ∇D(μ) = Q μ + A H⁻¹ f + b
    let grad = |mu: &DVector<f64>| &q * mu + &c + p.b();
    let dual = |mu: &DVector<f64>| 0.5 * mu.dot(&(&q * mu)) + mu.dot(&(&c + p.b()));
    let mut mu = DVector::zeros(l);
    let mut y = mu.clone();
    let mut t = 1.0f64;
    let mut last = dual(&mu);
    for _ in 0..max_iter {
        let next = (&y - grad(&y) / lip).map(|v| v.max(0.0));
        let value = dual(&next);
        if value > last {
            // Restart momentum.
            y = mu.clone();
            t = 1.0;
            continue;
        }
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        y = &next + (&next - &mu) * ((t - 1.0) / t_next);
        let step = (&next - &mu).amax();
        mu = next;
        t = t_next;
        last = value;
        if step < 1e-16 {
            break;
        }
    }
    let x = x_of(&mu);
    polish(p, &x, &mu).unwrap_or(x)
}

/// Re-solves the KKT system on the rows that look active at `(x, μ)`, for a range of activity
/// thresholds, and returns the first candidate that is primal and dual feasible. Such a point
/// satisfies the KKT conditions exactly and is the optimum of the strictly convex problem.
fn polish(p: &QpProblem, x: &DVector<f64>, mu: &DVector<f64>) -> Option<DVector<f64>> {
    let (n, a) = (p.dim(), p.a());
    let slack = p.b() - a * x;
    for tol in [1e-8, 1e-7, 1e-6, 1e-5, 1e-4, 1e-3] {
        for by_multiplier in [false, true] {
            let active: Vec<usize> = (0..a.nrows())
                .filter(|&i| if by_multiplier { mu[i] > tol } else { slack[i] < tol })
                .collect();
            let k = active.len();
            let mut kkt = DMatrix::zeros(n + k, n + k);
            let mut rhs = DVector::zeros(n + k);
            kkt.view_mut((0, 0), (n, n)).copy_from(p.h());
            rhs.rows_mut(0, n).copy_from(&-p.f());
            for (r, &i) in active.iter().enumerate() {
                kkt.view_mut((n + r, 0), (1, n)).copy_from(&a.row(i));
                kkt.view_mut((0, n + r), (n, 1)).copy_from(&a.row(i).transpose());
                rhs[n + r] = p.b()[i];
            }
            let Ok(sol) = kkt.svd(true, true).solve(&rhs, 1e-12) else {
                continue;
            };
            let refined = sol.rows(0, n).into_owned();
            let feasible = (a * &refined - p.b()).iter().all(|v| *v <= 1e-9);
            let dual_ok = sol.rows(n, k).iter().all(|m| *m >= -1e-9);
            if feasible && dual_ok {
                return Some(refined);
            }
        }
    }
    None
}
