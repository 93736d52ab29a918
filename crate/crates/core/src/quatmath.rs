//! Vector, matrix and quaternion algebra used throughout the crate.
//!
//! Quaternions are scalar-first and follow the Hamilton convention
//! (`i * j = k`). A unit quaternion `q` rotates body-frame vectors into the
//! inertial frame, so the columns of its rotation matrix are the body axes
//! `b1, b2, b3` expressed in inertial coordinates.

use std::ops::{Add, AddAssign, Div, Index, Mul, Neg, Sub};

use thiserror::Error;

/// Orthonormality tolerance accepted by [`UnitQuaternion::from_rotation_matrix`].
pub const ROTATION_TOLERANCE: f64 = 1e-6;

/// Smallest norm that [`Quaternion::normalize`] will accept.
pub const MIN_NORM: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QuatError {
    #[error("quaternion norm {0:e} is too small to normalize (corrupted state)")]
    NearZeroNorm(f64),
    #[error("matrix is not a proper rotation (orthonormality error {orthonormality:e}, det {det})")]
    NotRotation { orthonormality: f64, det: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3::new(0.0, 0.0, 0.0);
    pub const X: Vec3 = Vec3::new(1.0, 0.0, 0.0);
    pub const Y: Vec3 = Vec3::new(0.0, 1.0, 0.0);
    pub const Z: Vec3 = Vec3::new(0.0, 0.0, 1.0);

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub const fn splat(v: f64) -> Self {
        Self::new(v, v, v)
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn dot(self, o: Vec3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(self, o: Vec3) -> Vec3 {
        Vec3::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    /// Componentwise product, used to apply diagonal gain matrices.
    pub fn hadamard(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x * o.x, self.y * o.y, self.z * o.z)
    }

    pub fn map(self, f: impl Fn(f64) -> f64) -> Vec3 {
        Vec3::new(f(self.x), f(self.y), f(self.z))
    }

    /// Componentwise clamp to `[-limit, limit]`.
    pub fn clamp_abs(self, limit: Vec3) -> Vec3 {
        Vec3::new(
            self.x.clamp(-limit.x, limit.x),
            self.y.clamp(-limit.y, limit.y),
            self.z.clamp(-limit.z, limit.z),
        )
    }

    pub fn max_abs(self) -> f64 {
        self.x.abs().max(self.y.abs()).max(self.z.abs())
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl AddAssign for Vec3 {
    fn add_assign(&mut self, o: Vec3) {
        *self = *self + o;
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl Mul<Vec3> for f64 {
    type Output = Vec3;
    fn mul(self, v: Vec3) -> Vec3 {
        v * self
    }
}

impl Div<f64> for Vec3 {
    type Output = Vec3;
    fn div(self, s: f64) -> Vec3 {
        Vec3::new(self.x / s, self.y / s, self.z / s)
    }
}

impl Index<usize> for Vec3 {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        match i {
            0 => &self.x,
            1 => &self.y,
            2 => &self.z,
            _ => panic!("Vec3 index {i} out of range"),
        }
    }
}

/// 3x3 matrix stored row-major.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mat3 {
    pub m: [[f64; 3]; 3],
}

impl Mat3 {
    pub const IDENTITY: Mat3 = Mat3 {
        m: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
    };

    pub fn from_rows(m: [[f64; 3]; 3]) -> Self {
        Self { m }
    }

    pub fn from_columns(c0: Vec3, c1: Vec3, c2: Vec3) -> Self {
        Self {
            m: [[c0.x, c1.x, c2.x], [c0.y, c1.y, c2.y], [c0.z, c1.z, c2.z]],
        }
    }

    pub fn diagonal(d: Vec3) -> Self {
        Self {
            m: [[d.x, 0.0, 0.0], [0.0, d.y, 0.0], [0.0, 0.0, d.z]],
        }
    }

    pub fn diag(&self) -> Vec3 {
        Vec3::new(self.m[0][0], self.m[1][1], self.m[2][2])
    }

    pub fn column(&self, j: usize) -> Vec3 {
        Vec3::new(self.m[0][j], self.m[1][j], self.m[2][j])
    }

    pub fn transpose(&self) -> Mat3 {
        let mut t = [[0.0; 3]; 3];
        for (i, row) in self.m.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                t[j][i] = *v;
            }
        }
        Mat3 { m: t }
    }

    pub fn mul_vec(&self, v: Vec3) -> Vec3 {
        let r = |i: usize| self.m[i][0] * v.x + self.m[i][1] * v.y + self.m[i][2] * v.z;
        Vec3::new(r(0), r(1), r(2))
    }

    pub fn mul_mat(&self, o: &Mat3) -> Mat3 {
        let mut out = [[0.0; 3]; 3];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = (0..3).map(|k| self.m[i][k] * o.m[k][j]).sum();
            }
        }
        Mat3 { m: out }
    }

    pub fn trace(&self) -> f64 {
        self.m[0][0] + self.m[1][1] + self.m[2][2]
    }

    pub fn determinant(&self) -> f64 {
        let m = &self.m;
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }

    /// Largest absolute entry of `Sᵀ S - I`.
    pub fn orthonormality_error(&self) -> f64 {
        let g = self.transpose().mul_mat(self);
        let mut worst: f64 = 0.0;
        for (i, row) in g.m.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((v - target).abs());
            }
        }
        worst
    }

    pub fn is_finite(&self) -> bool {
        self.m.iter().flatten().all(|v| v.is_finite())
    }
}

/// General (not necessarily unit) quaternion, scalar first.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quaternion {
    pub w: f64,
    pub v: Vec3,
}

impl Quaternion {
    pub const IDENTITY: Quaternion = Quaternion {
        w: 1.0,
        v: Vec3::ZERO,
    };

    pub const fn new(w: f64, x: f64, y: f64, z: f64) -> Self {
        Self {
            w,
            v: Vec3::new(x, y, z),
        }
    }

    /// Pure quaternion `[0, u]`.
    pub const fn pure(u: Vec3) -> Self {
        Self { w: 0.0, v: u }
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        Self::new(a[0], a[1], a[2], a[3])
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.w, self.v.x, self.v.y, self.v.z]
    }

    pub fn conjugate(self) -> Quaternion {
        Quaternion { w: self.w, v: -self.v }
    }

    pub fn dot(self, o: Quaternion) -> f64 {
        self.w * o.w + self.v.dot(o.v)
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn scale(self, s: f64) -> Quaternion {
        Quaternion {
            w: self.w * s,
            v: self.v * s,
        }
    }

    pub fn normalize(self) -> Result<UnitQuaternion, QuatError> {
        let n = self.norm();
        if !(n > MIN_NORM) || !n.is_finite() {
            return Err(QuatError::NearZeroNorm(n));
        }
        Ok(UnitQuaternion(self.scale(1.0 / n)))
    }

    pub fn is_finite(self) -> bool {
        self.w.is_finite() && self.v.is_finite()
    }
}

/// Hamilton product.
impl Mul for Quaternion {
    type Output = Quaternion;
    fn mul(self, b: Quaternion) -> Quaternion {
        Quaternion {
            w: self.w * b.w - self.v.dot(b.v),
            v: b.v * self.w + self.v * b.w + self.v.cross(b.v),
        }
    }
}

impl Add for Quaternion {
    type Output = Quaternion;
    fn add(self, b: Quaternion) -> Quaternion {
        Quaternion {
            w: self.w + b.w,
            v: self.v + b.v,
        }
    }
}

impl Sub for Quaternion {
    type Output = Quaternion;
    fn sub(self, b: Quaternion) -> Quaternion {
        Quaternion {
            w: self.w - b.w,
            v: self.v - b.v,
        }
    }
}

impl Neg for Quaternion {
    type Output = Quaternion;
    fn neg(self) -> Quaternion {
        self.scale(-1.0)
    }
}

/// Hamilton product of two general quaternions.
pub fn quat_mul(a: Quaternion, b: Quaternion) -> Quaternion {
    a * b
}

pub fn quat_conjugate(q: Quaternion) -> Quaternion {
    q.conjugate()
}

/// Unit-norm quaternion representing an attitude.
///
/// The only ways to obtain one are normalizing constructors, so the norm is
/// within `1e-9` of one by construction. `q` and `-q` are both valid and
/// denote the same rotation; no sign canonicalization is applied except in
/// [`UnitQuaternion::from_rotation_matrix`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitQuaternion(Quaternion);

impl Default for UnitQuaternion {
    fn default() -> Self {
        Self::IDENTITY
    }
}

impl UnitQuaternion {
    pub const IDENTITY: UnitQuaternion = UnitQuaternion(Quaternion::IDENTITY);

    pub fn from_axis_angle(axis: Vec3, angle: f64) -> Result<Self, QuatError> {
        let n = axis.norm();
        if !(n > MIN_NORM) {
            return Err(QuatError::NearZeroNorm(n));
        }
        let (s, c) = (0.5 * angle).sin_cos();
        Quaternion {
            w: c,
            v: axis * (s / n),
        }
        .normalize()
    }

    /// Keeps `q` bit-for-bit when its norm is already within `1e-12` of one,
    /// otherwise normalizes it.
    pub fn from_quaternion(q: Quaternion) -> Result<Self, QuatError> {
        let n = q.norm();
        if (n - 1.0).abs() <= 1e-12 {
            Ok(UnitQuaternion(q))
        } else {
            q.normalize()
        }
    }

    /// Rotation by `angle` about the body z axis.
    pub fn from_yaw(angle: f64) -> Self {
        let (s, c) = (0.5 * angle).sin_cos();
        UnitQuaternion(Quaternion::new(c, 0.0, 0.0, s))
    }

    /// Z-Y-X (yaw, pitch, roll) composition.
    pub fn from_euler_zyx(roll: f64, pitch: f64, yaw: f64) -> Self {
        let (sr, cr) = (0.5 * roll).sin_cos();
        let (sp, cp) = (0.5 * pitch).sin_cos();
        let (sy, cy) = (0.5 * yaw).sin_cos();
        UnitQuaternion(Quaternion::new(
            cr * cp * cy + sr * sp * sy,
            sr * cp * cy - cr * sp * sy,
            cr * sp * cy + sr * cp * sy,
            cr * cp * sy - sr * sp * cy,
        ))
    }

    pub fn quaternion(self) -> Quaternion {
        self.0
    }

    pub fn w(self) -> f64 {
        self.0.w
    }

    pub fn v(self) -> Vec3 {
        self.0.v
    }

    /// Inverse rotation; equal to the conjugate for unit quaternions.
    pub fn inverse(self) -> UnitQuaternion {
        UnitQuaternion(self.0.conjugate())
    }

    pub fn negate(self) -> UnitQuaternion {
        UnitQuaternion(-self.0)
    }

    /// Rotate a body-frame vector into the inertial frame.
    pub fn rotate_vector(self, u: Vec3) -> Vec3 {
        // Expanded form of vec(q * [0, u] * q⁻¹).
        let t = self.0.v.cross(u) * 2.0;
        u + t * self.0.w + self.0.v.cross(t)
    }

    /// Body z axis `b3` expressed in the inertial frame.
    pub fn body_z(self) -> Vec3 {
        self.rotate_vector(Vec3::Z)
    }

    pub fn to_rotation_matrix(self) -> Mat3 {
        let Quaternion { w, v } = self.0;
        let (x, y, z) = (v.x, v.y, v.z);
        Mat3::from_rows([
            [
                1.0 - 2.0 * (y * y + z * z),
                2.0 * (x * y - w * z),
                2.0 * (x * z + w * y),
            ],
            [
                2.0 * (x * y + w * z),
                1.0 - 2.0 * (x * x + z * z),
                2.0 * (y * z - w * x),
            ],
            [
                2.0 * (x * z - w * y),
                2.0 * (y * z + w * x),
                1.0 - 2.0 * (x * x + y * y),
            ],
        ])
    }

    /// Attitude whose rotation matrix is `s`, using Shepperd's
    /// largest-diagonal branch selection. The result has `w >= 0`.
    pub fn from_rotation_matrix(s: &Mat3) -> Result<Self, QuatError> {
        let orthonormality = s.orthonormality_error();
        let det = s.determinant();
        if !s.is_finite()
            || !(orthonormality <= ROTATION_TOLERANCE)
            || !((det - 1.0).abs() <= ROTATION_TOLERANCE)
        {
            return Err(QuatError::NotRotation {
                orthonormality,
                det,
            });
        }
        let m = &s.m;
        let trace = s.trace();
        let candidates = [trace, m[0][0], m[1][1], m[2][2]];
        let branch = (1..4).fold(0, |best, i| {
            if candidates[i] > candidates[best] {
                i
            } else {
                best
            }
        });
        let q = match branch {
            0 => {
                let r = (1.0 + trace).sqrt();
                let k = 0.5 / r;
                Quaternion::new(
                    0.5 * r,
                    (m[2][1] - m[1][2]) * k,
                    (m[0][2] - m[2][0]) * k,
                    (m[1][0] - m[0][1]) * k,
                )
            }
            1 => {
                let r = (1.0 + m[0][0] - m[1][1] - m[2][2]).sqrt();
                let k = 0.5 / r;
                Quaternion::new(
                    (m[2][1] - m[1][2]) * k,
                    0.5 * r,
                    (m[0][1] + m[1][0]) * k,
                    (m[0][2] + m[2][0]) * k,
                )
            }
            2 => {
                let r = (1.0 - m[0][0] + m[1][1] - m[2][2]).sqrt();
                let k = 0.5 / r;
                Quaternion::new(
                    (m[0][2] - m[2][0]) * k,
                    (m[0][1] + m[1][0]) * k,
                    0.5 * r,
                    (m[1][2] + m[2][1]) * k,
                )
            }
            _ => {
                let r = (1.0 - m[0][0] - m[1][1] + m[2][2]).sqrt();
                let k = 0.5 / r;
                Quaternion::new(
                    (m[1][0] - m[0][1]) * k,
                    (m[0][2] + m[2][0]) * k,
                    (m[1][2] + m[2][1]) * k,
                    0.5 * r,
                )
            }
        };
        let q = if q.w < 0.0 { -q } else { q };
        q.normalize()
    }

    /// Z-Y-X Euler angles `(roll, pitch, yaw)` in radians. Reporting only.
    pub fn euler_zyx(self) -> (f64, f64, f64) {
        let Quaternion { w, v } = self.0;
        let (x, y, z) = (v.x, v.y, v.z);
        let roll = (2.0 * (w * x + y * z)).atan2(1.0 - 2.0 * (x * x + y * y));
        let pitch = (2.0 * (w * y - z * x)).clamp(-1.0, 1.0).asin();
        let yaw = (2.0 * (w * z + x * y)).atan2(1.0 - 2.0 * (y * y + z * z));
        (roll, pitch, yaw)
    }

    /// Heading of the body x axis projected on the horizontal plane.
    pub fn yaw(self) -> f64 {
        self.euler_zyx().2
    }

    /// Rotation angle in `[0, π]`.
    pub fn angle(self) -> f64 {
        2.0 * self.0.v.norm().atan2(self.0.w.abs())
    }
}

impl Mul for UnitQuaternion {
    type Output = UnitQuaternion;
    fn mul(self, b: UnitQuaternion) -> UnitQuaternion {
        UnitQuaternion(self.0 * b.0)
    }
}

pub fn rotate_vector(q: UnitQuaternion, u: Vec3) -> Vec3 {
    q.rotate_vector(u)
}

pub fn quat_from_rotation_matrix(s: &Mat3) -> Result<UnitQuaternion, QuatError> {
    UnitQuaternion::from_rotation_matrix(s)
}

pub fn normalize(q: Quaternion) -> Result<UnitQuaternion, QuatError> {
    q.normalize()
}
