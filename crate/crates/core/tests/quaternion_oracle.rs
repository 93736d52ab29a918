//! Quaternion algebra checked against nalgebra.

mod common;

use common::{from_na_vec, max_diff, na_vec, rng, to_na, unit_quaternion, vec3};
use fwmav_core::quatmath::{quat_from_rotation_matrix, quat_mul, rotate_vector, Mat3, UnitQuaternion, Vec3};
use nalgebra as na;

const N: usize = 10_000;

fn same_rotation(a: UnitQuaternion, b: UnitQuaternion) -> f64 {
    let (qa, qb) = (a.quaternion(), b.quaternion());
    let d = (qa - qb).norm().min((qa + qb).norm());
    d
}

#[test]
fn hamilton_product_matches_oracle() {
    let mut g = rng(10);
    for _ in 0..N {
        let (a, b) = (unit_quaternion(&mut g), unit_quaternion(&mut g));
        let ours = quat_mul(a.quaternion(), b.quaternion()).to_array();
        let theirs = (to_na(a) * to_na(b)).into_inner();
        let want = [theirs.w, theirs.i, theirs.j, theirs.k];
        for (x, y) in ours.iter().zip(want) {
            assert!((x - y).abs() < 1e-15, "{ours:?} vs {want:?}");
        }
    }
}

#[test]
fn rotation_matches_oracle() {
    let mut g = rng(11);
    for _ in 0..N {
        let q = unit_quaternion(&mut g);
        let u = vec3(&mut g, 2.0);
        let want = from_na_vec(&(to_na(q) * na_vec(u)));
        assert!(max_diff(rotate_vector(q, u), want) < 1e-14);
        let m = q.to_rotation_matrix();
        let r = to_na(q).to_rotation_matrix();
        for i in 0..3 {
            for j in 0..3 {
                let d = (m.m[i][j] - r[(i, j)]).abs();
                assert!(d < 4e-15, "{d:e}");
            }
        }
    }
}

#[test]
fn matrix_round_trip() {
    let mut g = rng(12);
    let mut worst = 0.0f64;
    for _ in 0..N {
        let q = unit_quaternion(&mut g);
        let back = quat_from_rotation_matrix(&q.to_rotation_matrix()).unwrap();
        worst = worst.max(same_rotation(q, back));
        assert!(back.w() >= 0.0);
    }
    assert!(worst < 1e-14, "{worst}");
}

#[test]
fn matrix_from_oracle_rotation() {
    let mut g = rng(13);
    for _ in 0..1000 {
        let axis = na::Unit::new_normalize(na_vec(vec3(&mut g, 1.0)));
        // Angles close to π exercise every branch.
        let angle = std::f64::consts::PI - (rand::Rng::random_range(&mut g, 0.0..1.0f64)).powi(6);
        let r = na::Rotation3::from_axis_angle(&axis, angle);
        let m = Mat3::from_rows(std::array::from_fn(|i| std::array::from_fn(|j| r[(i, j)])));
        let q = quat_from_rotation_matrix(&m).unwrap();
        let want = UnitQuaternion::from_axis_angle(from_na_vec(&axis), angle).unwrap();
        assert!(same_rotation(q, want) < 1e-12);
    }
}

#[test]
fn euler_zyx_matches_oracle() {
    let mut g = rng(14);
    for _ in 0..N {
        let q = unit_quaternion(&mut g);
        let (roll, pitch, yaw) = q.euler_zyx();
        let (r2, p2, y2) = to_na(q).euler_angles();
        assert!((roll - r2).abs() < 1e-9 && (pitch - p2).abs() < 1e-9 && (yaw - y2).abs() < 1e-9);
        let back = UnitQuaternion::from_euler_zyx(roll, pitch, yaw);
        assert!(same_rotation(q, back) < 1e-9);
    }
}

#[test]
fn norm_is_multiplicative() {
    let mut g = rng(15);
    for _ in 0..N {
        let a = unit_quaternion(&mut g).quaternion().scale(2.5);
        let b = unit_quaternion(&mut g).quaternion().scale(0.3);
        assert!(((a * b).norm() - a.norm() * b.norm()).abs() < 1e-14);
    }
}

#[test]
fn body_z_is_third_column() {
    let mut g = rng(16);
    for _ in 0..100 {
        let q = unit_quaternion(&mut g);
        assert!(max_diff(q.body_z(), q.to_rotation_matrix().column(2)) < 1e-15);
        assert!(max_diff(q.body_z(), rotate_vector(q, Vec3::Z)) < 1e-15);
    }
}
