//! Scenario configuration, the multirate simulation loop, CSV logging and
//! hover metrics.

mod config;
mod log;
mod metrics;
mod runner;
mod scenarios;

pub use config::{read_config, read_config_file, write_config, ConfigSource};
pub use log::{
    create_log_file, read_log, read_log_file, write_log, LogRecord, LogWriter, LOG_COLUMNS,
    LOG_VERSION,
};
pub use metrics::{compute_metrics, MetricsSummary};
pub use runner::{run_scenario, run_scenario_streaming, RunOutput, RunStats, Termination};
pub use scenarios::{
    robot_defaults, RobotDefaults, Scenario, ScenarioRegistry, BEEPLUS_ALTITUDE_ATTITUDE,
    BEEPLUS_POSITION, CUSTOM, DEFAULT_LAMBDA, ROBOBEE_HOVER,
};

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::allocation::{AllocationError, Mixer, MixerRegistry, ParamTable};
use crate::control::{AttitudeGains, ControlError, ControlOptions, FlightSetpoint, PositionGains};
use crate::dynamics::{DynamicsError, RigidBodyState, RobotParams};
use crate::estimation::{DerivativeFilter, EstimationError, NoiseModel};
use crate::quatmath::Vec3;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("{source_name}:{line}: {message}")]
    Parse {
        source_name: String,
        line: usize,
        message: String,
    },
    #[error("{source_name}:{line}: key `{key}`: {message}")]
    Field {
        source_name: String,
        line: usize,
        key: String,
        message: String,
    },
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error("invalid configuration: {0}")]
    Allocation(#[from] AllocationError),
    #[error("invalid configuration: {0}")]
    Control(#[from] ControlError),
    #[error("invalid configuration: {0}")]
    Estimation(#[from] EstimationError),
    #[error("invalid configuration: {0}")]
    Dynamics(#[from] DynamicsError),
    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),
    #[error("metrics window starting at t = {start} s contains no samples")]
    EmptyWindow { start: f64 },
    #[error("log error: {0}")]
    Log(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl HarnessError {
    /// True for errors caused by the configuration itself.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            HarnessError::Parse { .. }
                | HarnessError::Field { .. }
                | HarnessError::Invalid(_)
                | HarnessError::Allocation(_)
                | HarnessError::Control(_)
                | HarnessError::Estimation(_)
                | HarnessError::Dynamics(_)
                | HarnessError::UnknownScenario(_)
        )
    }
}

/// Loop rates in Hz.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Rates {
    pub physics_hz: u32,
    pub control_hz: u32,
    pub mocap_hz: u32,
}

impl Default for Rates {
    fn default() -> Self {
        Self {
            physics_hz: 10_000,
            control_hz: 2_000,
            mocap_hz: 500,
        }
    }
}

impl Rates {
    pub fn validate(&self) -> Result<(), HarnessError> {
        let Rates {
            physics_hz,
            control_hz,
            mocap_hz,
        } = *self;
        if mocap_hz == 0 || control_hz < mocap_hz || physics_hz < control_hz {
            return Err(HarnessError::Invalid(
                "rates must satisfy physics_hz >= control_hz >= mocap_hz > 0".into(),
            ));
        }
        if physics_hz % control_hz != 0 || control_hz % mocap_hz != 0 {
            return Err(HarnessError::Invalid(
                "physics_hz must be a multiple of control_hz, and control_hz of mocap_hz".into(),
            ));
        }
        if 1.0 / physics_hz as f64 > crate::dynamics::MAX_STEP {
            return Err(HarnessError::Invalid("physics_hz must be at least 1000".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Transition {
    /// Value jumps at the waypoint time.
    #[default]
    Step,
    /// Value moves linearly from the previous waypoint, arriving at this
    /// waypoint's time.
    Ramp,
}

impl fmt::Display for Transition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Transition::Step => "step",
            Transition::Ramp => "ramp",
        })
    }
}

impl FromStr for Transition {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "step" => Ok(Transition::Step),
            "ramp" => Ok(Transition::Ramp),
            other => Err(format!("unknown transition `{other}` (expected step or ramp)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Waypoint {
    pub t: f64,
    pub transition: Transition,
    pub setpoint: FlightSetpoint,
}

/// Timed setpoints, sorted by time.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SetpointSchedule {
    pub waypoints: Vec<Waypoint>,
}

impl SetpointSchedule {
    pub fn constant(sp: FlightSetpoint) -> Self {
        Self {
            waypoints: vec![Waypoint {
                t: 0.0,
                transition: Transition::Step,
                setpoint: sp,
            }],
        }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.waypoints.is_empty() {
            return Err(HarnessError::Invalid("setpoint schedule is empty".into()));
        }
        for pair in self.waypoints.windows(2) {
            if !(pair[1].t > pair[0].t) {
                return Err(HarnessError::Invalid(
                    "setpoint times must be strictly increasing".into(),
                ));
            }
        }
        for w in &self.waypoints {
            let sp = &w.setpoint;
            let finite = w.t.is_finite()
                && sp.r_d.is_finite()
                && sp.rdot_d.is_finite()
                && sp.rddot_d.is_finite()
                && sp.psi_d.is_finite()
                && sp.omega_hat_d.is_finite()
                && sp.tau_d.is_finite();
            if !finite {
                return Err(HarnessError::Invalid("setpoint values must be finite".into()));
            }
        }
        Ok(())
    }

    /// Setpoint active at time `t`.
    pub fn at(&self, t: f64) -> FlightSetpoint {
        let w = &self.waypoints;
        let idx = w.iter().rposition(|p| p.t <= t).unwrap_or(0);
        let current = w[idx];
        if let Some(next) = w.get(idx + 1) {
            if next.transition == Transition::Ramp && t >= current.t {
                let span = next.t - current.t;
                let alpha = (t - current.t) / span;
                let mut sp = current.setpoint;
                let dr = next.setpoint.r_d - current.setpoint.r_d;
                sp.r_d = current.setpoint.r_d + dr * alpha;
                sp.rdot_d = current.setpoint.rdot_d + dr / span;
                sp.psi_d = current.setpoint.psi_d
                    + (next.setpoint.psi_d - current.setpoint.psi_d) * alpha;
                return sp;
            }
        }
        current.setpoint
    }
}

/// Axis-aligned box the vehicle must stay inside.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SafetyBox {
    pub min: Vec3,
    pub max: Vec3,
}

impl SafetyBox {
    pub fn contains(&self, r: Vec3) -> bool {
        r.x >= self.min.x
            && r.x <= self.max.x
            && r.y >= self.min.y
            && r.y <= self.max.y
            && r.z >= self.min.z
            && r.z <= self.max.z
    }
}

/// Everything needed to run one simulation.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    /// Registry name of the scenario this configuration derives from.
    pub scenario: String,
    /// Simulated seconds.
    pub duration: f64,
    pub rates: Rates,
    pub robot: RobotParams,
    /// Parameters for the mixer registered under `robot.kind`.
    pub mixer: ParamTable,
    pub noise: NoiseModel,
    /// Derivative-filter constant λ (rad/s).
    pub lambda: f64,
    pub attitude_gains: AttitudeGains,
    pub position_gains: PositionGains,
    pub control: ControlOptions,
    pub initial: RigidBodyState,
    pub schedule: SetpointSchedule,
    pub safety: SafetyBox,
    /// Start of the metrics window (s).
    pub settle_s: f64,
}

impl ScenarioConfig {
    /// Number of controller ticks; errors unless `duration · control_hz` is
    /// an integer.
    pub fn control_ticks(&self) -> Result<u64, HarnessError> {
        let n = self.duration * self.rates.control_hz as f64;
        let rounded = n.round();
        if !(self.duration > 0.0) || !n.is_finite() || (n - rounded).abs() > 1e-6 || rounded < 1.0 {
            return Err(HarnessError::Invalid(format!(
                "duration {} s must be positive and a whole number of control periods",
                self.duration
            )));
        }
        Ok(rounded as u64)
    }

    pub fn build_mixer(&self) -> Result<Box<dyn Mixer>, HarnessError> {
        Ok(MixerRegistry::builtin().build(self.robot.kind.as_str(), &self.mixer)?)
    }

    /// Shrink the thrust margin above weight, `max_thrust − m g`, by
    /// `fraction` (0.3 removes 30 %) by scaling the mixer's thrust limit.
    pub fn reduce_thrust_headroom(&mut self, fraction: f64) -> Result<(), HarnessError> {
        if !(0.0..1.0).contains(&fraction) {
            return Err(HarnessError::Invalid("headroom fraction must lie in [0, 1)".into()));
        }
        let weight = self.robot.weight();
        let ratio = self.build_mixer()?.max_thrust() / weight;
        if ratio <= 1.0 {
            return Err(HarnessError::Invalid("mixer cannot lift the robot".into()));
        }
        let scale = (1.0 + (1.0 - fraction) * (ratio - 1.0)) / ratio;
        let key = MixerRegistry::builtin()
            .get(self.robot.kind.as_str())?
            .thrust_limit_param();
        let limit = self
            .mixer
            .get_mut(key)
            .ok_or_else(|| AllocationError::MissingParam(key.to_string()))?;
        *limit *= scale;
        Ok(())
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        self.rates.validate()?;
        self.control_ticks()?;
        self.robot.validate()?;
        self.build_mixer()?;
        self.noise.validate()?;
        DerivativeFilter::new(self.lambda, 1.0 / self.rates.mocap_hz as f64)?;
        self.attitude_gains.validate()?;
        self.position_gains.validate()?;
        if !(self.control.f_min_ratio > 0.0) || !self.control.f_min_ratio.is_finite() {
            return Err(HarnessError::Invalid("control.f_min_ratio must be positive".into()));
        }
        if !self.initial.is_finite() {
            return Err(HarnessError::Invalid("initial state must be finite".into()));
        }
        self.schedule.validate()?;
        let s = &self.safety;
        if !(s.min.x < s.max.x && s.min.y < s.max.y && s.min.z < s.max.z) {
            return Err(HarnessError::Invalid("safety.min must be below safety.max".into()));
        }
        if !s.contains(self.initial.r) {
            return Err(HarnessError::Invalid("initial position lies outside the safety box".into()));
        }
        if !(self.settle_s >= 0.0) {
            return Err(HarnessError::Invalid("metrics.settle_s must be non-negative".into()));
        }
        Ok(())
    }
}
