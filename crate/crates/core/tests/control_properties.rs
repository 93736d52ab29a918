//! Controller properties checked against independent evaluations and
//! closed-loop simulation.

mod common;

use std::f64::consts::PI;

use common::{rng, unit_quaternion, vec3};
use fwmav_core::control::{
    attitude_error, desired_rotation, position_force, AttitudeGains, ControlOptions, Controller,
    FlightSetpoint, PositionGains, StateEstimate, YawMode,
};
use fwmav_core::dynamics::RobotParams;
use fwmav_core::harness::{run_scenario, ScenarioRegistry, Transition, Waypoint, CUSTOM};
use fwmav_core::quatmath::{UnitQuaternion, Vec3};
use rand::Rng;

fn wrap(a: f64) -> f64 {
    (a + PI).rem_euclid(2.0 * PI) - PI
}

fn gains() -> (AttitudeGains, PositionGains) {
    let att = AttitudeGains::new(Vec3::new(6e-7, 6e-7, 2e-7), Vec3::new(3e-8, 3e-8, 1e-8)).unwrap();
    let pos = PositionGains {
        kp: Vec3::new(7e-4, 7e-4, 1.3e-3),
        kd: Vec3::new(4e-4, 4e-4, 5e-4),
        ki: Vec3::new(1.3e-4, 1.3e-4, 2.4e-4),
        integral_limit: Vec3::new(2e-4, 2e-4, 2e-4),
    };
    (att, pos)
}

#[test]
fn open_loop_yaw_error_decomposition() {
    // With ψ_d equal to the measured ZYX yaw, q_e = Rx(−φ_d) Ry(θ − θ_d) Rx(φ),
    // whose components satisfy n_e,z = n_e,y · tan(−(φ_d + φ)/2).
    let (att, pos) = gains();
    let opts = ControlOptions {
        yaw_mode: YawMode::OpenLoop,
        ..Default::default()
    };
    let p = RobotParams::robobee();
    let mut g = rng(20);
    let mut largest_ratio = 0.0f64;
    for _ in 0..2000 {
        let roll = g.random_range(-0.6..0.6);
        let pitch = g.random_range(-0.6..0.6);
        let yaw = g.random_range(-PI..PI);
        let est = StateEstimate {
            r: vec3(&mut g, 0.05),
            v: vec3(&mut g, 0.05),
            q: UnitQuaternion::from_euler_zyx(roll, pitch, yaw),
            omega: vec3(&mut g, 1.0),
        };
        let mut c = Controller::new(att, pos, opts).unwrap();
        let out = c.step(&est, &FlightSetpoint::hover_at(Vec3::ZERO), &p, 5e-4);
        assert!(!out.held_q_d);
        let (roll_d, _, yaw_d) = out.q_d.euler_zyx();
        assert!(wrap(yaw_d - yaw).abs() < 1e-9);
        let n = out.error.n_e;
        let predicted = n.y * (-(roll_d + roll) / 2.0).tan();
        assert!((n.z - predicted).abs() < 1e-12, "{} vs {predicted}", n.z);
        assert_eq!(out.wrench.torque.z, 0.0);
        if n.y.abs() > 1e-3 {
            largest_ratio = largest_ratio.max((n.z / n.y).abs());
        }
    }
    // Not identically zero, but bounded by the tilt.
    assert!(largest_ratio > 1e-3 && largest_ratio < 0.6_f64.tan() * 1.5);
}

#[test]
fn desired_rotation_structure() {
    let mut g = rng(21);
    for _ in 0..10_000 {
        let f_a = Vec3::new(g.random_range(-1.0..1.0), g.random_range(-1.0..1.0), g.random_range(0.05..1.0));
        let psi = g.random_range(-PI..PI);
        let s = desired_rotation(f_a, psi, 1e-3).unwrap();
        let b3 = f_a / f_a.norm();
        assert!((s.column(2) - b3).max_abs() < 1e-12);
        assert!((s.determinant() - 1.0).abs() < 1e-9);
        assert!(s.orthonormality_error() < 1e-9);
        let yaw = s.m[1][0].atan2(s.m[0][0]);
        assert!(wrap(yaw - psi).abs() < 1e-9, "{yaw} vs {psi}");
    }
}

#[test]
fn position_force_matches_componentwise_pid() {
    let mut g = rng(22);
    let p = RobotParams::beeplus();
    for _ in 0..10_000 {
        let r = vec3(&mut g, 0.5);
        let v = vec3(&mut g, 0.5);
        let integral = vec3(&mut g, 0.1);
        let sp = FlightSetpoint {
            r_d: vec3(&mut g, 0.5),
            rdot_d: vec3(&mut g, 0.5),
            rddot_d: vec3(&mut g, 2.0),
            ..Default::default()
        };
        let gains = PositionGains {
            kp: vec3(&mut g, 1e-3).map(f64::abs),
            kd: vec3(&mut g, 1e-3).map(f64::abs),
            ki: vec3(&mut g, 1e-3).map(f64::abs),
            integral_limit: Vec3::new(1.0, 1.0, 1.0),
        };
        let f = position_force(r, v, integral, &sp, &p, &gains).to_array();
        let (ra, va, ia) = (r.to_array(), v.to_array(), integral.to_array());
        let (rd, vd, ad) = (sp.r_d.to_array(), sp.rdot_d.to_array(), sp.rddot_d.to_array());
        let (kp, kd, ki) = (gains.kp.to_array(), gains.kd.to_array(), gains.ki.to_array());
        for i in 0..3 {
            let gravity = if i == 2 { p.mass * p.gravity } else { 0.0 };
            let want = p.mass * ad[i] + gravity - ki[i] * ia[i] - kd[i] * (va[i] - vd[i]) - kp[i] * (ra[i] - rd[i]);
            assert!((f[i] - want).abs() < 1e-15, "axis {i}: {} vs {want}", f[i]);
        }
    }
}

#[test]
fn integral_never_exceeds_limit() {
    let (att, pos) = gains();
    let p = RobotParams::robobee();
    let mut c = Controller::new(att, pos, ControlOptions::default()).unwrap();
    let mut g = rng(23);
    for _ in 0..20_000 {
        let est = StateEstimate {
            r: vec3(&mut g, 0.5) + Vec3::new(0.3, -0.3, 0.3),
            q: unit_quaternion(&mut g),
            ..Default::default()
        };
        c.step(&est, &FlightSetpoint::hover_at(Vec3::ZERO), &p, 5e-4);
        let term = pos.ki.hadamard(c.integral());
        for (t, lim) in term.to_array().iter().zip(pos.integral_limit.to_array()) {
            assert!(t.abs() <= lim * (1.0 + 1e-12));
        }
    }
}

#[test]
fn error_of_identical_attitudes_is_identity() {
    let mut g = rng(24);
    for _ in 0..1000 {
        let q = unit_quaternion(&mut g);
        let e = attitude_error(q, q);
        assert!((e.m_e - 1.0).abs() < 1e-15 && e.n_e.max_abs() < 1e-15);
        let e = attitude_error(q, q.negate());
        assert!((e.m_e + 1.0).abs() < 1e-15);
    }
}

#[test]
fn altitude_step_raises_then_restores_thrust() {
    let mut cfg = ScenarioRegistry::builtin().config(CUSTOM).unwrap();
    cfg.duration = 6.0;
    let hold = cfg.schedule.waypoints[0].setpoint;
    let mut raised = hold;
    raised.r_d.z += 0.1;
    cfg.schedule.waypoints.push(Waypoint {
        t: 1.0,
        transition: Transition::Step,
        setpoint: raised,
    });
    let out = run_scenario(&cfg).unwrap();
    assert!(out.termination.is_completed());
    let weight = cfg.robot.weight();
    let at = |t: f64| out.records.iter().find(|r| r.t >= t).unwrap();
    assert!((at(0.99).f_cmd - weight).abs() < 1e-3 * weight);
    assert!(at(1.0).f_cmd > 1.05 * weight);
    let last = out.records.last().unwrap();
    assert!((last.f_cmd - weight).abs() < 0.01 * weight);
    assert!((last.r.z - raised.r_d.z).abs() < 5e-3);
}
