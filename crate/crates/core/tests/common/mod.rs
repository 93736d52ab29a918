#![allow(dead_code)]

use fwmav_core::quatmath::{Quaternion, UnitQuaternion, Vec3};
use nalgebra as na;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniformly distributed rotation.
pub fn unit_quaternion(g: &mut ChaCha8Rng) -> UnitQuaternion {
    let c: [f64; 4] = std::array::from_fn(|_| g.sample(StandardNormal));
    Quaternion::from_array(c).normalize().unwrap()
}

pub fn vec3(g: &mut ChaCha8Rng, scale: f64) -> Vec3 {
    Vec3::new(
        g.random_range(-scale..scale),
        g.random_range(-scale..scale),
        g.random_range(-scale..scale),
    )
}

pub fn to_na(q: UnitQuaternion) -> na::UnitQuaternion<f64> {
    let [w, x, y, z] = q.quaternion().to_array();
    na::UnitQuaternion::from_quaternion(na::Quaternion::new(w, x, y, z))
}

pub fn na_vec(v: Vec3) -> na::Vector3<f64> {
    na::Vector3::new(v.x, v.y, v.z)
}

pub fn from_na_vec(v: &na::Vector3<f64>) -> Vec3 {
    Vec3::new(v.x, v.y, v.z)
}

pub fn max_diff(a: Vec3, b: Vec3) -> f64 {
    (a - b).max_abs()
}
