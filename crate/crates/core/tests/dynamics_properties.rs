//! Rigid-body integration: accuracy order, invariants and analytic cases.

mod common;

use common::{from_na_vec, na_vec, rng, to_na, unit_quaternion};
use fwmav_core::dynamics::{
    flap_ripple, state_derivative, step_rk4, step_rk4_with, RigidBodyState, RobotParams, Wrench,
};
use fwmav_core::quatmath::{Mat3, UnitQuaternion, Vec3};

fn tumbling_params() -> RobotParams {
    let mut p = RobotParams::robobee();
    p.inertia = Mat3::diagonal(Vec3::new(1e-9, 2e-9, 3e-9));
    p
}

fn integrate(s0: RigidBodyState, p: &RobotParams, dt: f64, t_end: f64) -> RigidBodyState {
    let n = (t_end / dt).round() as usize;
    let mut s = s0;
    let w = |t: f64| Wrench::new(p.mass * p.gravity * (1.0 + 0.2 * (7.0 * t).sin()), Vec3::new(2e-8 * (5.0 * t).cos(), -1e-8, 3e-8 * t));
    for k in 0..n {
        s = step_rk4_with(&s, p, k as f64 * dt, dt, w).unwrap();
    }
    s
}

fn distance(a: &RigidBodyState, b: &RigidBodyState) -> f64 {
    let dq = (a.q.quaternion() - b.q.quaternion()).norm();
    (a.r - b.r).norm() + (a.v - b.v).norm() + dq + (a.omega - b.omega).norm() * 0.01
}

#[test]
fn fourth_order_convergence() {
    let p = tumbling_params();
    let s0 = RigidBodyState {
        omega: Vec3::new(10.0, -15.0, 20.0),
        ..Default::default()
    };
    let t_end = 1.0;
    let dt = 1e-3;
    let reference = integrate(s0, &p, dt / 8.0, t_end);
    let e1 = distance(&integrate(s0, &p, dt, t_end), &reference);
    let e2 = distance(&integrate(s0, &p, dt / 2.0, t_end), &reference);
    let order = (e1 / e2).log2();
    assert!((3.5..=4.5).contains(&order), "observed order {order} ({e1:e}, {e2:e})");
}

#[test]
fn tilted_thrust_matches_rotation_matrix() {
    let p = RobotParams::robobee();
    let mut g = rng(30);
    for _ in 0..1000 {
        let q = unit_quaternion(&mut g);
        let s = RigidBodyState {
            q,
            ..Default::default()
        };
        let f = p.mass * p.gravity;
        let d = state_derivative(&s, &Wrench::new(f, Vec3::ZERO), &p);
        let b3 = from_na_vec(&(to_na(q).to_rotation_matrix() * na_vec(Vec3::Z)));
        let want = b3 * (f / p.mass) - Vec3::Z * p.gravity;
        assert!((d.v_dot - want).max_abs() < 1e-13);
    }
    // 90° about b1 sends the thrust axis to inertial −y.
    let q = UnitQuaternion::from_axis_angle(Vec3::X, std::f64::consts::FRAC_PI_2).unwrap();
    let s = RigidBodyState {
        q,
        ..Default::default()
    };
    let d = state_derivative(&s, &Wrench::new(p.mass * p.gravity, Vec3::ZERO), &p);
    assert!((d.v_dot - Vec3::new(0.0, -p.gravity, -p.gravity)).max_abs() < 1e-14);
}

#[test]
fn isotropic_spin_keeps_rate() {
    let mut p = RobotParams::robobee();
    p.inertia = Mat3::diagonal(Vec3::new(1.3e-9, 1.3e-9, 1.3e-9));
    p.gravity = 0.0;
    let w0 = Vec3::new(0.7, -3.0, 2.2);
    let mut s = RigidBodyState {
        omega: w0,
        ..Default::default()
    };
    for _ in 0..10_000 {
        s = step_rk4(&s, &Wrench::ZERO, &p, 1e-4).unwrap();
    }
    assert!((s.omega - w0).max_abs() < 1e-9);
}

#[test]
fn hover_is_a_fixed_point() {
    let p = RobotParams::beeplus();
    let s0 = RigidBodyState::at_rest(Vec3::new(0.1, -0.2, 0.3));
    let w = Wrench::new(p.mass * p.gravity, Vec3::ZERO);
    let mut s = s0;
    for _ in 0..1000 {
        let next = step_rk4(&s, &w, &p, 1e-4).unwrap();
        assert!(distance(&next, &s) < 1e-12);
        s = next;
    }
}

#[test]
fn ballistic_fall() {
    let p = RobotParams::robobee();
    let mut s = RigidBodyState {
        v: Vec3::new(0.2, 0.0, 1.0),
        ..Default::default()
    };
    for _ in 0..10_000 {
        s = step_rk4(&s, &Wrench::ZERO, &p, 1e-4).unwrap();
    }
    let want = Vec3::new(0.2, 0.0, 1.0 - 0.5 * p.gravity);
    assert!((s.r - want).max_abs() < 1e-6);
}

#[test]
fn ripple_averages_to_zero_over_a_period() {
    let mut p = RobotParams::robobee();
    p.ripple_torque_amp = Vec3::new(1e-7, 5e-6, 2e-7);
    p.ripple_force_amp = 3e-5;
    let period = 1.0 / p.flap_freq;
    let n = 10_000;
    let h = period / n as f64;
    // Trapezoid rule over one period, offset start.
    let t0 = 0.0123;
    let mut acc = [0.0; 4];
    for k in 0..=n {
        let wgt = if k == 0 || k == n { 0.5 } else { 1.0 };
        for (a, v) in acc.iter_mut().zip(flap_ripple(t0 + k as f64 * h, &p).to_array()) {
            *a += wgt * v * h;
        }
    }
    for a in acc {
        assert!((a / period).abs() < 1e-12);
    }
    assert_eq!(flap_ripple(0.0, &p), Wrench::ZERO);
}

#[test]
fn step_size_is_validated() {
    let p = RobotParams::robobee();
    let s = RigidBodyState::default();
    assert!(step_rk4(&s, &Wrench::ZERO, &p, 0.0).is_err());
    assert!(step_rk4(&s, &Wrench::ZERO, &p, 2e-3).is_err());
    assert!(step_rk4(&s, &Wrench::new(f64::NAN, Vec3::ZERO), &p, 1e-4).is_err());
}
