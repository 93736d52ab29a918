//! Rigid-body model shared by both robots: thrust along `b3`, body torque,
//! quaternion kinematics, plus a fixed-step RK4 integrator and an optional
//! zero-mean flapping ripple disturbance.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::quatmath::{Mat3, Quaternion, QuatError, UnitQuaternion, Vec3};

pub const DEFAULT_GRAVITY: f64 = 9.81;

/// Order-of-magnitude inertia placeholder (kg·m²); not a measured value.
pub const DEFAULT_INERTIA: Vec3 = Vec3::new(1.42e-9, 1.34e-9, 0.45e-9);

pub const MAX_STEP: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DynamicsError {
    #[error("integration blew up at t = {t} s")]
    Blowup { t: f64 },
    #[error("invalid step size {0} s (must be in (0, 1e-3])")]
    InvalidStep(f64),
    #[error("invalid robot parameters: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Quat(#[from] QuatError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RobotKind {
    RoboBee,
    BeePlus,
}

impl RobotKind {
    pub fn as_str(self) -> &'static str {
        match self {
            RobotKind::RoboBee => "robobee",
            RobotKind::BeePlus => "beeplus",
        }
    }
}

impl fmt::Display for RobotKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RobotKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "robobee" => Ok(RobotKind::RoboBee),
            "beeplus" => Ok(RobotKind::BeePlus),
            other => Err(format!("unknown robot kind `{other}` (expected robobee or beeplus)")),
        }
    }
}

/// Position, velocity, attitude and body rate of the airframe.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RigidBodyState {
    /// Inertial position (m).
    pub r: Vec3,
    /// Inertial velocity (m/s).
    pub v: Vec3,
    /// Attitude; rotates body vectors into the inertial frame.
    pub q: UnitQuaternion,
    /// Body-frame angular velocity (rad/s).
    pub omega: Vec3,
}

impl RigidBodyState {
    pub fn at_rest(r: Vec3) -> Self {
        Self {
            r,
            ..Default::default()
        }
    }

    pub fn is_finite(&self) -> bool {
        self.r.is_finite()
            && self.v.is_finite()
            && self.q.quaternion().is_finite()
            && self.omega.is_finite()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidBodyStateDerivative {
    pub r_dot: Vec3,
    pub v_dot: Vec3,
    pub q_dot: Quaternion,
    pub omega_dot: Vec3,
}

/// Thrust along `b3` (N) and body torque (N·m).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Wrench {
    pub thrust: f64,
    pub torque: Vec3,
}

impl Wrench {
    pub const ZERO: Wrench = Wrench {
        thrust: 0.0,
        torque: Vec3::ZERO,
    };

    pub fn new(thrust: f64, torque: Vec3) -> Self {
        Self { thrust, torque }
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        Self::new(a[0], Vec3::new(a[1], a[2], a[3]))
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.thrust, self.torque.x, self.torque.y, self.torque.z]
    }

    pub fn is_finite(&self) -> bool {
        self.thrust.is_finite() && self.torque.is_finite()
    }
}

impl std::ops::Add for Wrench {
    type Output = Wrench;
    fn add(self, o: Wrench) -> Wrench {
        Wrench::new(self.thrust + o.thrust, self.torque + o.torque)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RobotParams {
    pub kind: RobotKind,
    /// kg
    pub mass: f64,
    /// Diagonal body inertia (kg·m²).
    pub inertia: Mat3,
    pub gravity: f64,
    /// Flapping frequency (Hz).
    pub flap_freq: f64,
    pub ripple_torque_amp: Vec3,
    pub ripple_force_amp: f64,
}

impl RobotParams {
    /// ~75 mg two-winged robot.
    pub fn robobee() -> Self {
        Self {
            kind: RobotKind::RoboBee,
            mass: 75e-6,
            inertia: Mat3::diagonal(DEFAULT_INERTIA),
            gravity: DEFAULT_GRAVITY,
            flap_freq: 100.0,
            ripple_torque_amp: Vec3::ZERO,
            ripple_force_amp: 0.0,
        }
    }

    /// ~95 mg four-winged robot.
    pub fn beeplus() -> Self {
        Self {
            kind: RobotKind::BeePlus,
            mass: 95e-6,
            ..Self::robobee()
        }
    }

    pub fn for_kind(kind: RobotKind) -> Self {
        match kind {
            RobotKind::RoboBee => Self::robobee(),
            RobotKind::BeePlus => Self::beeplus(),
        }
    }

    pub fn weight(&self) -> f64 {
        self.mass * self.gravity
    }

    pub fn validate(&self) -> Result<(), DynamicsError> {
        let bad = |msg: &str| Err(DynamicsError::InvalidParams(msg.to_string()));
        if !(self.mass > 0.0) || !self.mass.is_finite() {
            return bad("mass must be positive");
        }
        if !self.gravity.is_finite() || self.gravity < 0.0 {
            return bad("gravity must be finite and non-negative");
        }
        if !self.inertia.is_finite() {
            return bad("inertia must be finite");
        }
        let j = &self.inertia.m;
        let off_diagonal = [j[0][1], j[0][2], j[1][0], j[1][2], j[2][0], j[2][1]];
        if off_diagonal.iter().any(|v| *v != 0.0) {
            return bad("inertia must be diagonal");
        }
        let d = self.inertia.diag();
        if !(d.x > 0.0 && d.y > 0.0 && d.z > 0.0) {
            return bad("inertia must be positive definite");
        }
        if !(self.flap_freq > 0.0) || !self.flap_freq.is_finite() {
            return bad("flap_freq must be positive");
        }
        if !self.ripple_torque_amp.is_finite() || !self.ripple_force_amp.is_finite() {
            return bad("ripple amplitudes must be finite");
        }
        Ok(())
    }
}

fn inertia_solve(p: &RobotParams, rhs: Vec3) -> Vec3 {
    let d = p.inertia.diag();
    Vec3::new(rhs.x / d.x, rhs.y / d.y, rhs.z / d.z)
}

/// Time derivative of the full state under the applied wrench.
pub fn state_derivative(s: &RigidBodyState, w: &Wrench, p: &RobotParams) -> RigidBodyStateDerivative {
    derivative(s.v, s.q.quaternion(), s.omega, w, p)
}

// `q` may be slightly off unit norm inside an RK4 step; the thrust axis is
// taken from the sandwich product scaled by 1/‖q‖² so it stays a pure rotation.
fn derivative(v: Vec3, q: Quaternion, omega: Vec3, w: &Wrench, p: &RobotParams) -> RigidBodyStateDerivative {
    let b3 = (q * Quaternion::pure(Vec3::Z) * q.conjugate()).v / q.dot(q);
    let v_dot = b3 * (w.thrust / p.mass) - Vec3::Z * p.gravity;
    let q_dot = (q * Quaternion::pure(omega)).scale(0.5);
    let j_omega = p.inertia.mul_vec(omega);
    let omega_dot = inertia_solve(p, w.torque - omega.cross(j_omega));
    RigidBodyStateDerivative {
        r_dot: v,
        v_dot,
        q_dot,
        omega_dot,
    }
}

#[derive(Clone, Copy)]
struct Stage {
    r: Vec3,
    v: Vec3,
    q: Quaternion,
    omega: Vec3,
}

impl Stage {
    fn offset(&self, d: &RigidBodyStateDerivative, h: f64) -> Stage {
        Stage {
            r: self.r + d.r_dot * h,
            v: self.v + d.v_dot * h,
            q: self.q + d.q_dot.scale(h),
            omega: self.omega + d.omega_dot * h,
        }
    }

    fn derivative(&self, w: &Wrench, p: &RobotParams) -> RigidBodyStateDerivative {
        derivative(self.v, self.q, self.omega, w, p)
    }
}

/// One classic RK4 step with a wrench that may vary within the step.
///
/// `wrench_at` is evaluated at `t`, `t + dt/2` (twice) and `t + dt`. The
/// attitude is renormalized after the step.
pub fn step_rk4_with<F>(
    s: &RigidBodyState,
    p: &RobotParams,
    t: f64,
    dt: f64,
    wrench_at: F,
) -> Result<RigidBodyState, DynamicsError>
where
    F: Fn(f64) -> Wrench,
{
    if !(dt > 0.0 && dt <= MAX_STEP) {
        return Err(DynamicsError::InvalidStep(dt));
    }
    let y0 = Stage {
        r: s.r,
        v: s.v,
        q: s.q.quaternion(),
        omega: s.omega,
    };
    let half = 0.5 * dt;
    let w_mid = wrench_at(t + half);
    let k1 = y0.derivative(&wrench_at(t), p);
    let k2 = y0.offset(&k1, half).derivative(&w_mid, p);
    let k3 = y0.offset(&k2, half).derivative(&w_mid, p);
    let k4 = y0.offset(&k3, dt).derivative(&wrench_at(t + dt), p);

    let c = dt / 6.0;
    let sum_v3 = |f: fn(&RigidBodyStateDerivative) -> Vec3| {
        (f(&k1) + f(&k2) * 2.0 + f(&k3) * 2.0 + f(&k4)) * c
    };
    let q_inc = (k1.q_dot + k2.q_dot.scale(2.0) + k3.q_dot.scale(2.0) + k4.q_dot).scale(c);

    let r = y0.r + sum_v3(|d| d.r_dot);
    let v = y0.v + sum_v3(|d| d.v_dot);
    let omega = y0.omega + sum_v3(|d| d.omega_dot);
    let q_raw = y0.q + q_inc;
    if !(r.is_finite() && v.is_finite() && omega.is_finite() && q_raw.is_finite()) {
        return Err(DynamicsError::Blowup { t: t + dt });
    }
    let q = q_raw
        .normalize()
        .map_err(|_| DynamicsError::Blowup { t: t + dt })?;
    Ok(RigidBodyState { r, v, q, omega })
}

/// One RK4 step holding `w` constant.
pub fn step_rk4(
    s: &RigidBodyState,
    w: &Wrench,
    p: &RobotParams,
    dt: f64,
) -> Result<RigidBodyState, DynamicsError> {
    step_rk4_with(s, p, 0.0, dt, |_| *w)
}

/// Zero-mean flapping disturbance: torque at the flap frequency, thrust at
/// twice the flap frequency.
pub fn flap_ripple(t: f64, p: &RobotParams) -> Wrench {
    let phase = 2.0 * PI * p.flap_freq * t;
    Wrench {
        thrust: p.ripple_force_amp * (2.0 * phase).sin(),
        torque: p.ripple_torque_amp * phase.sin(),
    }
}

/// Rotational kinetic energy `½ ωᵀ J ω`.
pub fn rotational_energy(s: &RigidBodyState, p: &RobotParams) -> f64 {
    0.5 * s.omega.dot(p.inertia.mul_vec(s.omega))
}

/// Norm of the body angular momentum `‖J ω‖`.
pub fn angular_momentum_norm(s: &RigidBodyState, p: &RobotParams) -> f64 {
    p.inertia.mul_vec(s.omega).norm()
}
