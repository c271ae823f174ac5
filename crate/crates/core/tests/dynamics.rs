mod common;

use nalgebra::{DMatrix, DVector};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use common::{random_model, random_q};
use vfikit::dynamics::{
    forward_dynamics, inverse_dynamics, kinetic_energy, mass_matrix, nonlinear_terms, potential_energy, RigidBodyModel,
};
use vfikit::geometry::Vec3;
use vfikit::kinematics::forward_kinematics;

#[test]
fn forward_dynamics_inverts_inverse_dynamics() {
    let mut rng = StdRng::seed_from_u64(40);
    for _ in 0..100 {
        let n = rng.gen_range(1..=9);
        let model = random_model(&mut rng, n);
        let q = random_q(&mut rng, n, 3.0);
        let qd = random_q(&mut rng, n, 2.0);
        let qdd = random_q(&mut rng, n, 2.0);
        let tau = inverse_dynamics(&model, &q, &qd, &qdd).unwrap();
        let back = forward_dynamics(&model, &q, &qd, &tau).unwrap();
        let err = (&back - &qdd).amax();
        assert!(err <= 1e-10 * (1.0 + qdd.amax()), "n={n} err={err:e}");
    }
}

#[test]
fn mass_matrix_columns_match_newton_euler() {
    let mut rng = StdRng::seed_from_u64(41);
    for _ in 0..30 {
        let n = rng.gen_range(1..=9);
        let model = random_model(&mut rng, n).without_gravity();
        let q = random_q(&mut rng, n, 3.0);
        let m = mass_matrix(&model, &q).unwrap();
        for i in 0..n {
            let mut e = DVector::zeros(n);
            e[i] = 1.0;
            let col = inverse_dynamics(&model, &q, &DVector::zeros(n), &e).unwrap();
            assert!((m.column(i) - col).amax() < 1e-12);
        }
        assert!(m.clone().cholesky().is_some());
    }
}

/// `½q̇ᵀMq̇` against `Σ ½m‖v‖² + ½ωᵀIω` with link twists summed from the joint axes.
#[test]
fn kinetic_energy_matches_link_twists() {
    let mut rng = StdRng::seed_from_u64(44);
    for _ in 0..50 {
        let n = rng.gen_range(1..=9);
        let model = random_model(&mut rng, n);
        let q = random_q(&mut rng, n, 3.0);
        let qd = random_q(&mut rng, n, 2.0);
        let poses = forward_kinematics(&model.chain, &q).unwrap();
        let mut oracle = 0.0;
        for (i, link) in model.links.iter().enumerate() {
            let pose = &poses.joints[i];
            let com = pose.translation.vector + pose.rotation * link.com;
            let (mut v, mut w) = (Vec3::zeros(), Vec3::zeros());
            for j in 0..=i {
                let axis = poses.axis(j);
                w += axis * qd[j];
                v += axis.cross(&(com - poses.origin(j))) * qd[j];
            }
            let rot = pose.rotation.to_rotation_matrix();
            let inertia = rot.matrix() * link.inertia * rot.matrix().transpose();
            oracle += 0.5 * link.mass * v.norm_squared() + 0.5 * w.dot(&(inertia * w));
        }
        let ke = kinetic_energy(&model, &q, &qd).unwrap();
        assert!(
            (ke - oracle).abs() <= 1e-9 * oracle.abs().max(1e-12),
            "{ke} vs {oracle}"
        );
    }
}

fn fd_mass_derivative(model: &RigidBodyModel, q: &DVector<f64>, k: usize, h: f64) -> DMatrix<f64> {
    let (mut qp, mut qm) = (q.clone(), q.clone());
    qp[k] += h;
    qm[k] -= h;
    (mass_matrix(model, &qp).unwrap() - mass_matrix(model, &qm).unwrap()) / (2.0 * h)
}

/// Lagrangian oracle: `nᵢ = Σⱼₖ (∂ₖMᵢⱼ − ½ ∂ᵢMⱼₖ) q̇ⱼq̇ₖ + ∂ᵢV`.
#[test]
fn bias_terms_match_lagrangian_oracle() {
    let mut rng = StdRng::seed_from_u64(42);
    let h = 1e-5;
    for _ in 0..30 {
        let n = rng.gen_range(1..=7);
        let model = random_model(&mut rng, n);
        let q = random_q(&mut rng, n, 3.0);
        let qd = random_q(&mut rng, n, 2.0);
        let dm: Vec<DMatrix<f64>> = (0..n).map(|k| fd_mass_derivative(&model, &q, k, h)).collect();
        let mut oracle = DVector::zeros(n);
        for i in 0..n {
            let mut qp = q.clone();
            let mut qm = q.clone();
            qp[i] += h;
            qm[i] -= h;
            let dv = (potential_energy(&model, &qp).unwrap() - potential_energy(&model, &qm).unwrap()) / (2.0 * h);
            let mut s = dv;
            for j in 0..n {
                for k in 0..n {
                    s += (dm[k][(i, j)] - 0.5 * dm[i][(j, k)]) * qd[j] * qd[k];
                }
            }
            oracle[i] = s;
        }
        let bias = nonlinear_terms(&model, &q, &qd).unwrap();
        let err = (&bias - &oracle).amax();
        assert!(err < 1e-6 * (1.0 + oracle.amax()), "n={n} err={err:e}");
    }
}

fn rk4(model: &RigidBodyModel, q: &mut DVector<f64>, qd: &mut DVector<f64>, dt: f64) {
    let zero = DVector::zeros(q.len());
    let acc = |q: &DVector<f64>, qd: &DVector<f64>| forward_dynamics(model, q, qd, &zero).unwrap();
    let k1v = acc(q, qd);
    let k1q = qd.clone();
    let k2v = acc(&(&*q + &k1q * (0.5 * dt)), &(&*qd + &k1v * (0.5 * dt)));
    let k2q = &*qd + &k1v * (0.5 * dt);
    let k3v = acc(&(&*q + &k2q * (0.5 * dt)), &(&*qd + &k2v * (0.5 * dt)));
    let k3q = &*qd + &k2v * (0.5 * dt);
    let k4v = acc(&(&*q + &k3q * dt), &(&*qd + &k3v * dt));
    let k4q = &*qd + &k3v * dt;
    *q += (k1q + k2q * 2.0 + k3q * 2.0 + k4q) * (dt / 6.0);
    *qd += (k1v + k2v * 2.0 + k3v * 2.0 + k4v) * (dt / 6.0);
}

#[test]
fn unforced_motion_conserves_energy() {
    let mut rng = StdRng::seed_from_u64(43);
    for gravity in [false, true] {
        for _ in 0..5 {
            let n = rng.gen_range(2..=6);
            let mut model = random_model(&mut rng, n);
            if !gravity {
                model = model.without_gravity();
            }
            let mut q = random_q(&mut rng, n, 3.0);
            let mut qd = random_q(&mut rng, n, 1.0);
            let energy = |q: &DVector<f64>, qd: &DVector<f64>| {
                kinetic_energy(&model, q, qd).unwrap() + potential_energy(&model, q).unwrap()
            };
            let e0 = energy(&q, &qd);
            let scale = kinetic_energy(&model, &q, &qd).unwrap().max(1.0);
            for _ in 0..2000 {
                rk4(&model, &mut q, &mut qd, 5e-4);
            }
            let drift = (energy(&q, &qd) - e0).abs() / scale;
            assert!(drift < 1e-6, "gravity={gravity} n={n} drift={drift:e}");
        }
    }
}
