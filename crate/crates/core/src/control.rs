//! Quaternion attitude controller and cascaded position controller.
//!
//! The position loop produces a desired force `f_a`; its projection on the
//! current body z axis is the thrust command and its direction, together with
//! a desired yaw, defines the desired attitude. The attitude loop turns the
//! quaternion error into a body torque with an explicit `sgn(m_e)` factor so
//! that `q_e` and `-q_e` produce the same command.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::dynamics::{RobotParams, Wrench};
use crate::quatmath::{Mat3, QuatError, UnitQuaternion, Vec3};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ControlError {
    #[error("desired force norm {norm:e} N is below the minimum {f_min:e} N")]
    DegenerateThrust { norm: f64, f_min: f64 },
    #[error("desired thrust axis is aligned with the yaw reference vector")]
    GimbalDegenerate,
    #[error("invalid gains: {0}")]
    InvalidGains(String),
    #[error(transparent)]
    Quat(#[from] QuatError),
}

/// Diagonals of the attitude gain matrices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttitudeGains {
    /// Proportional gain on the quaternion vector error (N·m).
    pub k1: Vec3,
    /// Damping gain on the rate error (N·m·s/rad).
    pub k2: Vec3,
}

impl AttitudeGains {
    pub fn new(k1: Vec3, k2: Vec3) -> Result<Self, ControlError> {
        let g = Self { k1, k2 };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<(), ControlError> {
        if !all_positive(self.k1) || !all_positive(self.k2) {
            return Err(ControlError::InvalidGains(
                "attitude gains k1, k2 must be strictly positive".into(),
            ));
        }
        Ok(())
    }
}

/// Diagonals of the position PID gains plus the anti-windup limit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PositionGains {
    /// N/m
    pub kp: Vec3,
    /// N·s/m
    pub kd: Vec3,
    /// N/(m·s)
    pub ki: Vec3,
    /// Bound on the magnitude of the integral force term `K_i ∫e` (N).
    pub integral_limit: Vec3,
}

impl PositionGains {
    pub fn validate(&self) -> Result<(), ControlError> {
        if !all_positive(self.kp) || !all_positive(self.kd) {
            return Err(ControlError::InvalidGains("kp and kd must be strictly positive".into()));
        }
        if !all_non_negative(self.ki) || !all_non_negative(self.integral_limit) {
            return Err(ControlError::InvalidGains(
                "ki and integral_limit must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

fn all_positive(v: Vec3) -> bool {
    v.is_finite() && v.x > 0.0 && v.y > 0.0 && v.z > 0.0
}

fn all_non_negative(v: Vec3) -> bool {
    v.is_finite() && v.x >= 0.0 && v.y >= 0.0 && v.z >= 0.0
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FlightSetpoint {
    pub r_d: Vec3,
    pub rdot_d: Vec3,
    pub rddot_d: Vec3,
    /// Desired yaw (rad). Ignored in open-loop yaw mode.
    pub psi_d: f64,
    /// Desired angular velocity expressed in the desired frame (rad/s).
    pub omega_hat_d: Vec3,
    /// Feedforward torque (N·m).
    pub tau_d: Vec3,
}

impl FlightSetpoint {
    pub fn hover_at(r_d: Vec3) -> Self {
        Self {
            r_d,
            ..Default::default()
        }
    }
}

/// Scalar and vector parts of `q_e = q_d⁻¹ ∗ q`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttitudeError {
    pub m_e: f64,
    pub n_e: Vec3,
}

impl AttitudeError {
    pub fn negate(self) -> Self {
        Self {
            m_e: -self.m_e,
            n_e: -self.n_e,
        }
    }
}

/// `sgn` with `sgn(0) = +1`.
pub fn sgn(x: f64) -> f64 {
    if x < 0.0 {
        -1.0
    } else {
        1.0
    }
}

pub fn attitude_error(q: UnitQuaternion, q_d: UnitQuaternion) -> AttitudeError {
    let e = q_d.inverse() * q;
    AttitudeError {
        m_e: e.w(),
        n_e: e.v(),
    }
}

/// `τ = −K₁ sgn(m_e) n_e − K₂ (ω − ω_d) + τ_d`.
pub fn attitude_torque(
    e: &AttitudeError,
    omega: Vec3,
    omega_d: Vec3,
    tau_d: Vec3,
    g: &AttitudeGains,
) -> Vec3 {
    -(g.k1.hadamard(e.n_e) * sgn(e.m_e)) - g.k2.hadamard(omega - omega_d) + tau_d
}

/// Desired body rate from the desired-frame rate: the same components,
/// reinterpreted in the body frame.
pub fn desired_omega_in_body(omega_hat_d: Vec3) -> Vec3 {
    omega_hat_d
}

/// How `ω̂_d` is carried into the body frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OmegaDesiredFrame {
    /// Component transfer, no rotation.
    #[default]
    Literal,
    /// Rotate from the desired frame into the body frame by `q_e⁻¹`.
    Rotated,
}

impl OmegaDesiredFrame {
    pub fn apply(self, omega_hat_d: Vec3, e: &AttitudeError) -> Result<Vec3, ControlError> {
        match self {
            OmegaDesiredFrame::Literal => Ok(desired_omega_in_body(omega_hat_d)),
            OmegaDesiredFrame::Rotated => {
                let q_e = crate::quatmath::Quaternion { w: e.m_e, v: e.n_e }.normalize()?;
                Ok(q_e.inverse().rotate_vector(omega_hat_d))
            }
        }
    }
}

/// `f_a = −K_p (r − r_d) − K_d (ṙ − ṙ_d) − K_i ∫(r − r_d) + m g n₃ + m r̈_d`.
pub fn position_force(
    r: Vec3,
    v: Vec3,
    integral: Vec3,
    sp: &FlightSetpoint,
    p: &RobotParams,
    g: &PositionGains,
) -> Vec3 {
    -g.kp.hadamard(r - sp.r_d) - g.kd.hadamard(v - sp.rdot_d) - g.ki.hadamard(integral)
        + Vec3::Z * p.weight()
        + sp.rddot_d * p.mass
}

/// Thrust magnitude `f = f_aᵀ b₃`, floored at zero.
pub fn thrust_magnitude(f_a: Vec3, q: UnitQuaternion) -> f64 {
    f_a.dot(q.body_z()).max(0.0)
}

/// Desired rotation matrix `[b1d b2d b3d]` from the desired force and yaw.
pub fn desired_rotation(f_a: Vec3, psi_d: f64, f_min: f64) -> Result<Mat3, ControlError> {
    let norm = f_a.norm();
    if !(norm > f_min) {
        return Err(ControlError::DegenerateThrust { norm, f_min });
    }
    let b3d = f_a / norm;
    let (s, c) = psi_d.sin_cos();
    let heading_normal = Vec3::new(-s, c, 0.0);
    let b1_raw = heading_normal.cross(b3d);
    let b1_norm = b1_raw.norm();
    if !(b1_norm > 1e-6) {
        return Err(ControlError::GimbalDegenerate);
    }
    let b1d = b1_raw / b1_norm;
    let b2d = b3d.cross(b1d);
    Ok(Mat3::from_columns(b1d, b2d, b3d))
}

pub fn desired_attitude(f_a: Vec3, psi_d: f64, f_min: f64) -> Result<UnitQuaternion, ControlError> {
    let s_d = desired_rotation(f_a, psi_d, f_min)?;
    Ok(UnitQuaternion::from_rotation_matrix(&s_d)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum YawMode {
    /// No yaw feedback: `ψ_d` follows the measured yaw and the yaw torque
    /// channel carries only the feedforward term.
    #[default]
    OpenLoop,
    /// Full three-axis torque law with `ψ_d` from the setpoint.
    Regulated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PositionMode {
    #[default]
    Full,
    /// Only the vertical channel of `f_a` is used; the thrust axis is
    /// regulated upright.
    AltitudeOnly,
}

macro_rules! keyword_enum {
    ($ty:ty { $($variant:ident => $text:literal),+ $(,)? }) => {
        impl $ty {
            pub fn as_str(self) -> &'static str {
                match self { $(Self::$variant => $text),+ }
            }
        }
        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }
        impl FromStr for $ty {
            type Err = String;
            fn from_str(s: &str) -> Result<Self, String> {
                match s {
                    $($text => Ok(Self::$variant),)+
                    other => Err(format!(
                        "unknown value `{}` (expected one of: {})",
                        other,
                        [$($text),+].join(", ")
                    )),
                }
            }
        }
    };
}

keyword_enum!(YawMode { OpenLoop => "open_loop", Regulated => "regulated" });
keyword_enum!(PositionMode { Full => "full", AltitudeOnly => "altitude_only" });
keyword_enum!(OmegaDesiredFrame { Literal => "literal", Rotated => "rotated" });

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlOptions {
    pub yaw_mode: YawMode,
    pub position_mode: PositionMode,
    pub omega_d_frame: OmegaDesiredFrame,
    /// Minimum `‖f_a‖` as a fraction of the weight.
    pub f_min_ratio: f64,
}

impl Default for ControlOptions {
    fn default() -> Self {
        Self {
            yaw_mode: YawMode::OpenLoop,
            position_mode: PositionMode::Full,
            omega_d_frame: OmegaDesiredFrame::Literal,
            f_min_ratio: 0.05,
        }
    }
}

/// Pose and rates fed to the controller.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StateEstimate {
    pub r: Vec3,
    pub v: Vec3,
    pub q: UnitQuaternion,
    pub omega: Vec3,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlOutput {
    pub wrench: Wrench,
    pub f_a: Vec3,
    pub q_d: UnitQuaternion,
    pub error: AttitudeError,
    /// Yaw actually used to build `q_d`.
    pub psi_d: f64,
    /// True when `q_d` was held from the previous tick.
    pub held_q_d: bool,
}

/// Position + attitude controller state machine.
#[derive(Debug, Clone, PartialEq)]
pub struct Controller {
    pub attitude_gains: AttitudeGains,
    pub position_gains: PositionGains,
    pub options: ControlOptions,
    integral: Vec3,
    prev_q_d: UnitQuaternion,
}

impl Controller {
    pub fn new(
        attitude_gains: AttitudeGains,
        position_gains: PositionGains,
        options: ControlOptions,
    ) -> Result<Self, ControlError> {
        attitude_gains.validate()?;
        position_gains.validate()?;
        Ok(Self {
            attitude_gains,
            position_gains,
            options,
            integral: Vec3::ZERO,
            prev_q_d: UnitQuaternion::IDENTITY,
        })
    }

    /// Accumulated `∫(r − r_d) dt` (m·s).
    pub fn integral(&self) -> Vec3 {
        self.integral
    }

    pub fn previous_q_d(&self) -> UnitQuaternion {
        self.prev_q_d
    }

    fn integral_bound(&self) -> Vec3 {
        let g = &self.position_gains;
        let axis = |ki: f64, lim: f64| if ki > 0.0 { lim / ki } else { 0.0 };
        Vec3::new(
            axis(g.ki.x, g.integral_limit.x),
            axis(g.ki.y, g.integral_limit.y),
            axis(g.ki.z, g.integral_limit.z),
        )
    }

    /// One control tick.
    ///
    /// The force law uses the integral accumulated up to the previous tick;
    /// the integral is then advanced by `(r − r_d) dt` and clamped so that
    /// `|K_i ∫e|` stays within the anti-windup limit.
    pub fn step(
        &mut self,
        est: &StateEstimate,
        sp: &FlightSetpoint,
        p: &RobotParams,
        dt: f64,
    ) -> ControlOutput {
        let opts = self.options;
        let mut f_a = position_force(est.r, est.v, self.integral, sp, p, &self.position_gains);
        let mut err_pos = est.r - sp.r_d;
        if opts.position_mode == PositionMode::AltitudeOnly {
            f_a = Vec3::new(0.0, 0.0, f_a.z);
            err_pos = Vec3::new(0.0, 0.0, err_pos.z);
        }
        self.integral = (self.integral + err_pos * dt).clamp_abs(self.integral_bound());

        let thrust = thrust_magnitude(f_a, est.q);
        let psi_d = match opts.yaw_mode {
            YawMode::OpenLoop => est.q.yaw(),
            YawMode::Regulated => sp.psi_d,
        };
        let f_min = opts.f_min_ratio * p.weight();
        let (q_d, held_q_d) = match desired_attitude(f_a, psi_d, f_min) {
            Ok(q_d) => (q_d, false),
            Err(_) => (self.prev_q_d, true),
        };
        self.prev_q_d = q_d;

        let error = attitude_error(est.q, q_d);
        let omega_d = opts
            .omega_d_frame
            .apply(sp.omega_hat_d, &error)
            .unwrap_or_else(|_| desired_omega_in_body(sp.omega_hat_d));
        let mut torque = attitude_torque(&error, est.omega, omega_d, sp.tau_d, &self.attitude_gains);
        if opts.yaw_mode == YawMode::OpenLoop {
            torque.z = sp.tau_d.z;
        }
        ControlOutput {
            wrench: Wrench::new(thrust, torque),
            f_a,
            q_d,
            error,
            psi_d,
            held_q_d,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, FRAC_PI_3};

    fn unit_quat() -> impl Strategy<Value = UnitQuaternion> {
        prop::array::uniform4(-1.0f64..1.0)
            .prop_filter("non-degenerate", |a| a.iter().map(|v| v * v).sum::<f64>() > 1e-3)
            .prop_map(|a| crate::quatmath::Quaternion::from_array(a).normalize().unwrap())
    }

    fn gains() -> AttitudeGains {
        AttitudeGains::new(Vec3::new(1.0, 2.0, 0.5), Vec3::new(0.1, 0.2, 0.3)).unwrap()
    }

    fn pos_gains() -> PositionGains {
        PositionGains {
            kp: Vec3::splat(0.1),
            kd: Vec3::splat(0.01),
            ki: Vec3::splat(0.02),
            integral_limit: Vec3::splat(1e-4),
        }
    }

    #[test]
    fn zero_error_gives_zero_torque() {
        let e = attitude_error(UnitQuaternion::IDENTITY, UnitQuaternion::IDENTITY);
        assert_eq!(e, AttitudeError { m_e: 1.0, n_e: Vec3::ZERO });
        let w = Vec3::new(0.2, 0.1, -0.3);
        assert_eq!(attitude_torque(&e, w, w, Vec3::ZERO, &gains()), Vec3::ZERO);
    }

    #[test]
    fn half_angle_error_form() {
        let q = UnitQuaternion::from_axis_angle(Vec3::Z, FRAC_PI_2).unwrap();
        let e = attitude_error(q, UnitQuaternion::IDENTITY);
        assert!((e.m_e - FRAC_1_SQRT_2).abs() < 1e-15);
        assert!((e.n_e - Vec3::new(0.0, 0.0, FRAC_1_SQRT_2)).max_abs() < 1e-15);
    }

    #[test]
    fn roll_error_torque() {
        let g = AttitudeGains {
            k1: Vec3::splat(1.0),
            k2: Vec3::splat(0.0),
        };
        let q = UnitQuaternion::from_axis_angle(Vec3::X, FRAC_PI_2).unwrap();
        let e = attitude_error(q, UnitQuaternion::IDENTITY);
        let tau = attitude_torque(&e, Vec3::ZERO, Vec3::ZERO, Vec3::ZERO, &g);
        assert!((tau - Vec3::new(-FRAC_1_SQRT_2, 0.0, 0.0)).max_abs() < 1e-15);
    }

    #[test]
    fn sign_of_zero_is_positive() {
        assert_eq!(sgn(0.0), 1.0);
        assert_eq!(sgn(-0.0), 1.0);
        assert_eq!(sgn(-1e-300), -1.0);
    }

    #[test]
    fn literal_desired_rate() {
        assert_eq!(desired_omega_in_body(Vec3::ZERO), Vec3::ZERO);
        assert_eq!(desired_omega_in_body(Vec3::new(0.1, 0.0, 0.0)), Vec3::new(0.1, 0.0, 0.0));
        let e = AttitudeError { m_e: 1.0, n_e: Vec3::ZERO };
        let w = Vec3::new(0.3, -0.2, 0.1);
        assert_eq!(OmegaDesiredFrame::Rotated.apply(w, &e).unwrap(), w);
    }

    #[test]
    fn gains_are_validated() {
        assert!(AttitudeGains::new(Vec3::new(1.0, 0.0, 1.0), Vec3::splat(1.0)).is_err());
        let mut g = pos_gains();
        g.ki.y = -1.0;
        assert!(g.validate().is_err());
        let mut g = pos_gains();
        g.kd.z = 0.0;
        assert!(g.validate().is_err());
    }

    #[test]
    fn position_force_examples() {
        let p = RobotParams::robobee();
        let f = position_force(Vec3::ZERO, Vec3::ZERO, Vec3::ZERO, &FlightSetpoint::default(), &p, &pos_gains());
        assert_eq!(f, Vec3::new(0.0, 0.0, 7.5e-5 * 9.81));

        let g = PositionGains {
            kp: Vec3::new(1e-9, 1e-9, 0.1),
            kd: Vec3::splat(1e-9),
            ki: Vec3::ZERO,
            integral_limit: Vec3::ZERO,
        };
        let sp = FlightSetpoint::hover_at(Vec3::new(0.0, 0.0, 0.01));
        let f = position_force(Vec3::ZERO, Vec3::ZERO, Vec3::ZERO, &sp, &p, &g);
        assert!((f.z - (0.001 + p.weight())).abs() < 1e-15);
        assert!(f.x.abs() < 1e-20 && f.y.abs() < 1e-20);
    }

    #[test]
    fn thrust_projection() {
        let w = 7.5e-5 * 9.81;
        assert_eq!(thrust_magnitude(Vec3::new(0.0, 0.0, w), UnitQuaternion::IDENTITY), w);
        let tilted = UnitQuaternion::from_axis_angle(Vec3::Y, FRAC_PI_3).unwrap();
        assert!((thrust_magnitude(Vec3::new(0.0, 0.0, w), tilted) - 0.5 * w).abs() < 1e-15);
        assert_eq!(thrust_magnitude(Vec3::new(0.0, 0.0, -w), UnitQuaternion::IDENTITY), 0.0);
    }

    #[test]
    fn desired_attitude_examples() {
        let w = Vec3::new(0.0, 0.0, 7.5e-5 * 9.81);
        let q = desired_attitude(w, 0.0, 1e-6).unwrap();
        assert_eq!(q, UnitQuaternion::IDENTITY);
        let q = desired_attitude(w, FRAC_PI_2, 1e-6).unwrap();
        assert!((q.w() - FRAC_1_SQRT_2).abs() < 1e-15);
        assert!((q.v() - Vec3::new(0.0, 0.0, FRAC_1_SQRT_2)).max_abs() < 1e-15);
    }

    #[test]
    fn desired_attitude_errors() {
        assert!(matches!(
            desired_attitude(Vec3::new(0.0, 0.0, 1e-7), 0.0, 1e-6),
            Err(ControlError::DegenerateThrust { .. })
        ));
        // Horizontal thrust along the yaw reference normal (-sinψ, cosψ, 0).
        assert_eq!(
            desired_attitude(Vec3::new(0.0, 1.0, 0.0), 0.0, 1e-6),
            Err(ControlError::GimbalDegenerate)
        );
    }

    #[test]
    fn hover_at_setpoint_commands_weight() {
        let p = RobotParams::robobee();
        let att = gains();
        let mut c = Controller::new(att, pos_gains(), ControlOptions::default()).unwrap();
        let r = Vec3::new(0.0, 0.0, 0.3);
        let est = StateEstimate { r, ..Default::default() };
        let out = c.step(&est, &FlightSetpoint::hover_at(r), &p, 5e-4);
        assert_eq!(out.wrench, Wrench::new(p.weight(), Vec3::ZERO));
        assert!(!out.held_q_d);
    }

    #[test]
    fn degenerate_thrust_holds_previous_attitude() {
        let p = RobotParams::robobee();
        let mut c = Controller::new(gains(), pos_gains(), ControlOptions::default()).unwrap();
        let est = StateEstimate::default();
        let first = c.step(&est, &FlightSetpoint::default(), &p, 5e-4);
        // Large upward position error cancels gravity compensation.
        let sp = FlightSetpoint::hover_at(Vec3::new(0.0, 0.0, -p.weight() / 0.1));
        let out = c.step(&est, &sp, &p, 5e-4);
        assert!(out.held_q_d);
        assert_eq!(out.q_d, first.q_d);
    }

    #[test]
    fn integral_is_clamped() {
        let p = RobotParams::robobee();
        let g = pos_gains();
        let mut c = Controller::new(gains(), g, ControlOptions::default()).unwrap();
        let est = StateEstimate { r: Vec3::new(1.0, -2.0, 0.5), ..Default::default() };
        for _ in 0..10_000 {
            c.step(&est, &FlightSetpoint::default(), &p, 5e-4);
            let term = g.ki.hadamard(c.integral());
            assert!(term.x.abs() <= g.integral_limit.x + 1e-18);
            assert!(term.y.abs() <= g.integral_limit.y + 1e-18);
            assert!(term.z.abs() <= g.integral_limit.z + 1e-18);
        }
    }

    #[test]
    fn open_loop_yaw_follows_measurement() {
        let p = RobotParams::robobee();
        let mut c = Controller::new(gains(), pos_gains(), ControlOptions::default()).unwrap();
        let q = UnitQuaternion::from_euler_zyx(0.02, -0.03, 1.2);
        let est = StateEstimate { q, ..Default::default() };
        let out = c.step(&est, &FlightSetpoint::default(), &p, 5e-4);
        assert!((out.psi_d - 1.2).abs() < 1e-12);
        assert_eq!(out.wrench.torque.z, 0.0);
    }

    proptest! {
        #[test]
        fn torque_is_sign_invariant(
            q in unit_quat(),
            qd in unit_quat(),
            w in prop::array::uniform3(-3.0f64..3.0),
        ) {
            let e = attitude_error(q, qd);
            let w = Vec3::from_array(w);
            let wd = Vec3::new(0.1, -0.2, 0.05);
            let a = attitude_torque(&e, w, wd, Vec3::ZERO, &gains());
            let b = attitude_torque(&e.negate(), w, wd, Vec3::ZERO, &gains());
            prop_assert!((a - b).max_abs() < 1e-15);
            let c = attitude_torque(&attitude_error(q.negate(), qd), w, wd, Vec3::ZERO, &gains());
            prop_assert!((a - c).max_abs() < 1e-12);
        }

        #[test]
        fn desired_rotation_is_proper(
            f in prop::array::uniform3(-1.0f64..1.0),
            fz in 0.05f64..2.0,
            psi in -3.1f64..3.1,
        ) {
            let f_a = Vec3::new(f[0], f[1], fz);
            let s = desired_rotation(f_a, psi, 1e-9).unwrap();
            prop_assert!(s.orthonormality_error() < 1e-9);
            prop_assert!((s.determinant() - 1.0).abs() < 1e-9);
            prop_assert!((s.column(2) - f_a / f_a.norm()).max_abs() < 1e-12);
            // Yaw oracle: heading of the first column.
            let yaw = s.m[1][0].atan2(s.m[0][0]);
            let dpsi = (yaw - psi + std::f64::consts::PI).rem_euclid(2.0 * std::f64::consts::PI) - std::f64::consts::PI;
            prop_assert!(dpsi.abs() < 1e-9);
        }
    }
}
