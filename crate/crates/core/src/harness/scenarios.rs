//! Built-in scenarios, selectable by name.
//!
//! Gains, inertias and mixing coefficients below are simulation-tuned
//! placeholders; only the masses, rates and scenario durations correspond
//! to reported hardware values.

use std::collections::BTreeMap;
use std::sync::Arc;

use super::{HarnessError, Rates, SafetyBox, ScenarioConfig, SetpointSchedule, Transition, Waypoint};
use crate::allocation::{MixerRegistry, ParamTable};
use crate::control::{
    AttitudeGains, ControlOptions, FlightSetpoint, PositionGains, PositionMode, YawMode,
};
use crate::dynamics::{RigidBodyState, RobotKind, RobotParams};
use crate::estimation::NoiseModel;
use crate::quatmath::Vec3;

pub const ROBOBEE_HOVER: &str = "robobee_hover";
pub const BEEPLUS_ALTITUDE_ATTITUDE: &str = "beeplus_altitude_attitude";
pub const BEEPLUS_POSITION: &str = "beeplus_position";
pub const CUSTOM: &str = "custom";

/// Default derivative-filter constant (rad/s).
pub const DEFAULT_LAMBDA: f64 = 50.0;

const HOVER_ALTITUDE: f64 = 0.3;
/// Time for the altitude reference to ramp from the ground to hover.
const TAKEOFF_RAMP_S: f64 = 0.5;

/// Robot-dependent defaults: airframe, mixer table and gains.
#[derive(Debug, Clone, PartialEq)]
pub struct RobotDefaults {
    pub robot: RobotParams,
    pub mixer: ParamTable,
    pub attitude_gains: AttitudeGains,
    pub position_gains: PositionGains,
}

/// Attitude gains placing the small-angle closed-loop poles at natural
/// frequency `wn` and damping `zeta` (the vector error is half the angle).
fn attitude_gains(inertia: Vec3, wn: f64, zeta: f64) -> AttitudeGains {
    AttitudeGains {
        k1: inertia * (2.0 * wn * wn),
        k2: inertia * (2.0 * zeta * wn),
    }
}

/// PID gains with characteristic polynomial `(s + a)(s² + 2ζωs + ω²)` per
/// axis for a point mass `m`.
fn pid_axis(m: f64, w: f64, zeta: f64, a: f64) -> (f64, f64, f64) {
    let kp = m * (w * w + 2.0 * zeta * w * a);
    let kd = m * (2.0 * zeta * w + a);
    let ki = m * a * w * w;
    (kp, kd, ki)
}

fn position_gains(m: f64, weight: f64, w_xy: f64, w_z: f64, zeta: f64, a: f64) -> PositionGains {
    let (pxy, dxy, ixy) = pid_axis(m, w_xy, zeta, a);
    let (pz, dz, iz) = pid_axis(m, w_z, zeta, a);
    PositionGains {
        kp: Vec3::new(pxy, pxy, pz),
        kd: Vec3::new(dxy, dxy, dz),
        ki: Vec3::new(ixy, ixy, iz),
        integral_limit: Vec3::splat(0.3 * weight),
    }
}

pub fn robot_defaults(kind: RobotKind) -> RobotDefaults {
    let mut robot = RobotParams::for_kind(kind);
    let (w_att, w_xy, w_z) = match kind {
        RobotKind::RoboBee => (15.0, 3.0, 4.0),
        RobotKind::BeePlus => (15.0, 3.0, 4.0),
    };
    // Pitch-dominant: in-phase roll and pitch ripple would pump yaw through
    // the (Jx − Jy) ωx ωy coupling, and yaw has no damping here.
    robot.ripple_torque_amp = match kind {
        RobotKind::RoboBee => Vec3::new(0.0, 5e-6, 1e-7),
        RobotKind::BeePlus => Vec3::new(0.0, 1e-6, 1e-7),
    };
    robot.ripple_force_amp = 0.2 * robot.weight();
    let mixer = MixerRegistry::builtin()
        .get(kind.as_str())
        .expect("built-in mixer")
        .default_params(robot.weight());
    RobotDefaults {
        attitude_gains: attitude_gains(robot.inertia.diag(), w_att, 0.8),
        position_gains: position_gains(robot.mass, robot.weight(), w_xy, w_z, 0.9, 0.2),
        mixer,
        robot,
    }
}

fn base_config(name: &str, kind: RobotKind, duration: f64) -> ScenarioConfig {
    let d = robot_defaults(kind);
    ScenarioConfig {
        scenario: name.to_string(),
        duration,
        rates: Rates::default(),
        robot: d.robot,
        mixer: d.mixer,
        noise: NoiseModel {
            pos_sigma: 2e-4,
            angle_sigma: 3e-3,
            seed: 1,
        },
        lambda: DEFAULT_LAMBDA,
        attitude_gains: d.attitude_gains,
        position_gains: d.position_gains,
        control: ControlOptions::default(),
        initial: RigidBodyState::default(),
        schedule: takeoff_schedule(),
        safety: SafetyBox {
            min: Vec3::new(-0.5, -0.5, -0.1),
            max: Vec3::new(0.5, 0.5, 1.0),
        },
        settle_s: 1.0,
    }
}

/// Ramp from the origin to hover altitude, then hold.
fn takeoff_schedule() -> SetpointSchedule {
    SetpointSchedule {
        waypoints: vec![
            Waypoint {
                t: 0.0,
                transition: Transition::Step,
                setpoint: FlightSetpoint::hover_at(Vec3::ZERO),
            },
            Waypoint {
                t: TAKEOFF_RAMP_S,
                transition: Transition::Ramp,
                setpoint: FlightSetpoint::hover_at(Vec3::new(0.0, 0.0, HOVER_ALTITUDE)),
            },
        ],
    }
}

/// A named, ready-to-run scenario.
pub trait Scenario: Send + Sync {
    fn name(&self) -> &'static str;
    fn description(&self) -> &'static str;
    fn robot(&self) -> RobotKind;
    fn config(&self) -> ScenarioConfig;
}

struct RoboBeeHover;

impl Scenario for RoboBeeHover {
    fn name(&self) -> &'static str {
        ROBOBEE_HOVER
    }
    fn description(&self) -> &'static str {
        "two-winged robot: take off from the origin and hold position for 20 s, yaw open-loop"
    }
    fn robot(&self) -> RobotKind {
        RobotKind::RoboBee
    }
    fn config(&self) -> ScenarioConfig {
        base_config(self.name(), self.robot(), 20.0)
    }
}

struct BeePlusAltitudeAttitude;

impl Scenario for BeePlusAltitudeAttitude {
    fn name(&self) -> &'static str {
        BEEPLUS_ALTITUDE_ATTITUDE
    }
    fn description(&self) -> &'static str {
        "four-winged robot: regulate altitude with the thrust axis upright for 5 s, yaw open-loop"
    }
    fn robot(&self) -> RobotKind {
        RobotKind::BeePlus
    }
    fn config(&self) -> ScenarioConfig {
        let mut c = base_config(self.name(), self.robot(), 5.0);
        // Horizontal position is unregulated here; allow drift.
        c.safety.min = Vec3::new(-3.0, -3.0, -0.1);
        c.safety.max = Vec3::new(3.0, 3.0, 1.0);
        c.control.position_mode = PositionMode::AltitudeOnly;
        c.control.yaw_mode = YawMode::OpenLoop;
        c
    }
}

struct BeePlusPosition;

impl Scenario for BeePlusPosition {
    fn name(&self) -> &'static str {
        BEEPLUS_POSITION
    }
    fn description(&self) -> &'static str {
        "four-winged robot: take off and hold position for 2 s, yaw open-loop"
    }
    fn robot(&self) -> RobotKind {
        RobotKind::BeePlus
    }
    fn config(&self) -> ScenarioConfig {
        let mut c = base_config(self.name(), self.robot(), 2.0);
        c.settle_s = 0.5;
        c
    }
}

struct Custom;

impl Scenario for Custom {
    fn name(&self) -> &'static str {
        CUSTOM
    }
    fn description(&self) -> &'static str {
        "noise- and ripple-free hover template for user-defined runs (set robot.kind first)"
    }
    fn robot(&self) -> RobotKind {
        RobotKind::RoboBee
    }
    fn config(&self) -> ScenarioConfig {
        custom_config(self.robot())
    }
}

/// Template for `custom` runs on the given robot.
pub(crate) fn custom_config(kind: RobotKind) -> ScenarioConfig {
    let mut c = base_config(CUSTOM, kind, 10.0);
    c.noise.pos_sigma = 0.0;
    c.noise.angle_sigma = 0.0;
    c.robot.ripple_torque_amp = Vec3::ZERO;
    c.robot.ripple_force_amp = 0.0;
    c.schedule = SetpointSchedule::constant(FlightSetpoint::hover_at(Vec3::new(
        0.0,
        0.0,
        HOVER_ALTITUDE,
    )));
    c.initial.r = Vec3::new(0.0, 0.0, HOVER_ALTITUDE);
    c
}

/// Name → scenario lookup.
#[derive(Clone)]
pub struct ScenarioRegistry {
    scenarios: BTreeMap<&'static str, Arc<dyn Scenario>>,
}

impl Default for ScenarioRegistry {
    fn default() -> Self {
        Self::builtin()
    }
}

impl ScenarioRegistry {
    pub fn builtin() -> Self {
        let mut r = Self {
            scenarios: BTreeMap::new(),
        };
        r.register(Arc::new(RoboBeeHover));
        r.register(Arc::new(BeePlusAltitudeAttitude));
        r.register(Arc::new(BeePlusPosition));
        r.register(Arc::new(Custom));
        r
    }

    pub fn register(&mut self, s: Arc<dyn Scenario>) {
        self.scenarios.insert(s.name(), s);
    }

    pub fn get(&self, name: &str) -> Result<Arc<dyn Scenario>, HarnessError> {
        self.scenarios
            .get(name)
            .cloned()
            .ok_or_else(|| HarnessError::UnknownScenario(name.to_string()))
    }

    pub fn iter(&self) -> impl Iterator<Item = &Arc<dyn Scenario>> {
        self.scenarios.values()
    }

    pub fn config(&self, name: &str) -> Result<ScenarioConfig, HarnessError> {
        Ok(self.get(name)?.config())
    }
}
