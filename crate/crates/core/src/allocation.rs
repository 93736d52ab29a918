//! Force & torque to actuator-command mappings for both robots.
//!
//! Each robot's mapping lives behind the [`Mixer`] trait. Mixers are built by
//! name through [`MixerRegistry`] from a flat table of numeric parameters so
//! that the harness can select and configure them at runtime.
//!
//! Saturation is applied after the unclamped inverse map; the residual wrench
//! is not redistributed among unsaturated channels.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Debug;
use std::sync::Arc;

use thiserror::Error;

use crate::dynamics::{RobotKind, Wrench};
use crate::quatmath::Vec3;

/// Numeric parameters for a mixer, keyed by parameter name.
pub type ParamTable = BTreeMap<String, f64>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AllocationError {
    #[error("mixing coefficient `{name}` must be strictly positive (got {value})")]
    NonPositive { name: &'static str, value: f64 },
    #[error("missing mixer parameter `{0}`")]
    MissingParam(String),
    #[error("unknown mixer parameter `{key}` for mixer `{mixer}`")]
    UnknownParam { mixer: String, key: String },
    #[error("no mixer registered under `{0}`")]
    UnknownMixer(String),
}

fn positive(name: &'static str, value: f64) -> Result<f64, AllocationError> {
    if value > 0.0 && value.is_finite() {
        Ok(value)
    } else {
        Err(AllocationError::NonPositive { name, value })
    }
}

/// Four actuator command channels. Their meaning depends on the mixer:
/// `(θ_amp, θ_roll, θ_pitch, θ_yaw)` for the two-winged robot and
/// `(v1, v2, v3, v4)` for the four-winged one.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ActuatorCommand(pub [f64; 4]);

/// Which command channels were clipped by saturation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SaturationFlags(pub [bool; 4]);

impl SaturationFlags {
    pub fn any(&self) -> bool {
        self.0.iter().any(|f| *f)
    }

    /// 1-based indices of the clipped channels.
    pub fn indices(&self) -> Vec<usize> {
        (0..4).filter(|i| self.0[*i]).map(|i| i + 1).collect()
    }
}

fn clamp_channel(value: f64, lo: f64, hi: f64, flag: &mut bool) -> f64 {
    if value < lo {
        *flag = true;
        lo
    } else if value > hi {
        *flag = true;
        hi
    } else {
        value
    }
}

// ---------------------------------------------------------------------------
// Two-winged robot: diagonal map.

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoboBeeMixParams {
    k_amp: f64,
    k_roll: f64,
    k_pitch: f64,
    k_yaw: f64,
}

impl RoboBeeMixParams {
    pub fn new(k_amp: f64, k_roll: f64, k_pitch: f64, k_yaw: f64) -> Result<Self, AllocationError> {
        Ok(Self {
            k_amp: positive("k_amp", k_amp)?,
            k_roll: positive("k_roll", k_roll)?,
            k_pitch: positive("k_pitch", k_pitch)?,
            k_yaw: positive("k_yaw", k_yaw)?,
        })
    }

    pub fn coefficients(&self) -> [f64; 4] {
        [self.k_amp, self.k_roll, self.k_pitch, self.k_yaw]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RoboBeeCommand {
    pub theta_amp: f64,
    pub theta_roll: f64,
    pub theta_pitch: f64,
    pub theta_yaw: f64,
}

impl RoboBeeCommand {
    pub fn to_array(self) -> [f64; 4] {
        [self.theta_amp, self.theta_roll, self.theta_pitch, self.theta_yaw]
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        Self {
            theta_amp: a[0],
            theta_roll: a[1],
            theta_pitch: a[2],
            theta_yaw: a[3],
        }
    }
}

/// Command limits for the two-winged robot. The amplitude channel is clamped
/// to `[0, amp_max]`, the others symmetrically.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoboBeeLimits {
    pub amp_max: f64,
    pub roll_max: f64,
    pub pitch_max: f64,
    pub yaw_max: f64,
}

pub fn robobee_forward(c: &RoboBeeCommand, p: &RoboBeeMixParams) -> Wrench {
    Wrench::new(
        p.k_amp * c.theta_amp,
        Vec3::new(p.k_roll * c.theta_roll, p.k_pitch * c.theta_pitch, p.k_yaw * c.theta_yaw),
    )
}

pub fn robobee_inverse(w: &Wrench, p: &RoboBeeMixParams) -> RoboBeeCommand {
    RoboBeeCommand {
        theta_amp: w.thrust / p.k_amp,
        theta_roll: w.torque.x / p.k_roll,
        theta_pitch: w.torque.y / p.k_pitch,
        theta_yaw: w.torque.z / p.k_yaw,
    }
}

pub fn robobee_saturate(c: &RoboBeeCommand, l: &RoboBeeLimits) -> (RoboBeeCommand, SaturationFlags) {
    let mut f = [false; 4];
    let out = RoboBeeCommand {
        theta_amp: clamp_channel(c.theta_amp, 0.0, l.amp_max, &mut f[0]),
        theta_roll: clamp_channel(c.theta_roll, -l.roll_max, l.roll_max, &mut f[1]),
        theta_pitch: clamp_channel(c.theta_pitch, -l.pitch_max, l.pitch_max, &mut f[2]),
        theta_yaw: clamp_channel(c.theta_yaw, -l.yaw_max, l.yaw_max, &mut f[3]),
    };
    (out, SaturationFlags(f))
}

// ---------------------------------------------------------------------------
// Four-winged robot: quadrotor-like map.

/// Row sign patterns of the four-winged mapping; rows are thrust, roll,
/// pitch and yaw, columns are wings 1..4.
pub const BEEPLUS_SIGNS: [[f64; 4]; 4] = [
    [1.0, 1.0, 1.0, 1.0],
    [-1.0, -1.0, 1.0, 1.0],
    [1.0, -1.0, 1.0, -1.0],
    [1.0, -1.0, -1.0, 1.0],
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeePlusMixParams {
    k_f: f64,
    k_s: f64,
    d1: f64,
    d2: f64,
    d3: f64,
}

impl BeePlusMixParams {
    /// Rejects zero or negative entries, which would make the map singular.
    pub fn new(k_f: f64, k_s: f64, d1: f64, d2: f64, d3: f64) -> Result<Self, AllocationError> {
        Ok(Self {
            k_f: positive("k_f", k_f)?,
            k_s: positive("k_s", k_s)?,
            d1: positive("d1", d1)?,
            d2: positive("d2", d2)?,
            d3: positive("d3", d3)?,
        })
    }

    pub fn k_f(&self) -> f64 {
        self.k_f
    }

    /// Per-row scale of the forward map: `k_f, k_f d1, k_f d2, k_s d3`.
    fn row_scale(&self) -> [f64; 4] {
        [self.k_f, self.k_f * self.d1, self.k_f * self.d2, self.k_s * self.d3]
    }

    /// Forward 4x4 matrix mapping `(v1..v4)` to `(f, τ1, τ2, τ3)`.
    pub fn forward_matrix(&self) -> [[f64; 4]; 4] {
        let scale = self.row_scale();
        let mut m = [[0.0; 4]; 4];
        for (i, row) in m.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = scale[i] * BEEPLUS_SIGNS[i][j];
            }
        }
        m
    }

    /// Closed-form inverse matrix mapping `(f, τ1, τ2, τ3)` to `(v1..v4)`.
    pub fn inverse_matrix(&self) -> [[f64; 4]; 4] {
        let scale = self.row_scale();
        let mut m = [[0.0; 4]; 4];
        for (i, row) in m.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = BEEPLUS_SIGNS[j][i] / (4.0 * scale[j]);
            }
        }
        m
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BeePlusCommand {
    pub v: [f64; 4],
}

fn mat_vec(m: &[[f64; 4]; 4], x: &[f64; 4]) -> [f64; 4] {
    let mut out = [0.0; 4];
    for (o, row) in out.iter_mut().zip(m) {
        *o = row.iter().zip(x).map(|(a, b)| a * b).sum();
    }
    out
}

pub fn beeplus_forward(c: &BeePlusCommand, p: &BeePlusMixParams) -> Wrench {
    let [v1, v2, v3, v4] = c.v;
    Wrench::new(
        p.k_f * (v1 + v2 + v3 + v4),
        Vec3::new(
            p.k_f * p.d1 * (-v1 - v2 + v3 + v4),
            p.k_f * p.d2 * (v1 - v2 + v3 - v4),
            p.k_s * p.d3 * (v1 - v2 - v3 + v4),
        ),
    )
}

pub fn beeplus_inverse(w: &Wrench, p: &BeePlusMixParams) -> BeePlusCommand {
    BeePlusCommand {
        v: mat_vec(&p.inverse_matrix(), &w.to_array()),
    }
}

/// Clamp each command magnitude to `[0, v_max]`.
pub fn beeplus_saturate(c: &BeePlusCommand, v_max: f64) -> (BeePlusCommand, SaturationFlags) {
    let mut f = [false; 4];
    let mut v = c.v;
    for (i, x) in v.iter_mut().enumerate() {
        *x = clamp_channel(*x, 0.0, v_max, &mut f[i]);
    }
    (BeePlusCommand { v }, SaturationFlags(f))
}

// ---------------------------------------------------------------------------
// Runtime-selectable mixers.

/// A wrench ↔ actuator-command mapping with saturation.
pub trait Mixer: Debug + Send + Sync {
    fn name(&self) -> &'static str;

    /// Unclamped inverse map.
    fn allocate(&self, w: &Wrench) -> ActuatorCommand;

    /// Clamp to actuator limits.
    fn saturate(&self, c: &ActuatorCommand) -> (ActuatorCommand, SaturationFlags);

    /// Wrench actually produced by a command.
    fn forward(&self, c: &ActuatorCommand) -> Wrench;

    /// Largest thrust the actuators can produce.
    fn max_thrust(&self) -> f64;

    /// Inverse map, saturation and forward map in one call. Returns the
    /// clamped command, its flags and the wrench it really produces.
    fn realize(&self, w: &Wrench) -> (ActuatorCommand, SaturationFlags, Wrench) {
        let (cmd, flags) = self.saturate(&self.allocate(w));
        let produced = self.forward(&cmd);
        (cmd, flags, produced)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoboBeeMixer {
    pub params: RoboBeeMixParams,
    pub limits: RoboBeeLimits,
}

impl Mixer for RoboBeeMixer {
    fn name(&self) -> &'static str {
        RobotKind::RoboBee.as_str()
    }

    fn allocate(&self, w: &Wrench) -> ActuatorCommand {
        ActuatorCommand(robobee_inverse(w, &self.params).to_array())
    }

    fn saturate(&self, c: &ActuatorCommand) -> (ActuatorCommand, SaturationFlags) {
        let (out, flags) = robobee_saturate(&RoboBeeCommand::from_array(c.0), &self.limits);
        (ActuatorCommand(out.to_array()), flags)
    }

    fn forward(&self, c: &ActuatorCommand) -> Wrench {
        robobee_forward(&RoboBeeCommand::from_array(c.0), &self.params)
    }

    fn max_thrust(&self) -> f64 {
        self.params.k_amp * self.limits.amp_max
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BeePlusMixer {
    pub params: BeePlusMixParams,
    pub v_max: f64,
}

impl Mixer for BeePlusMixer {
    fn name(&self) -> &'static str {
        RobotKind::BeePlus.as_str()
    }

    fn allocate(&self, w: &Wrench) -> ActuatorCommand {
        ActuatorCommand(beeplus_inverse(w, &self.params).v)
    }

    fn saturate(&self, c: &ActuatorCommand) -> (ActuatorCommand, SaturationFlags) {
        let (out, flags) = beeplus_saturate(&BeePlusCommand { v: c.0 }, self.v_max);
        (ActuatorCommand(out.v), flags)
    }

    fn forward(&self, c: &ActuatorCommand) -> Wrench {
        beeplus_forward(&BeePlusCommand { v: c.0 }, &self.params)
    }

    fn max_thrust(&self) -> f64 {
        4.0 * self.params.k_f * self.v_max
    }
}

/// Builds a [`Mixer`] from a parameter table.
pub trait MixerBuilder: Send + Sync {
    fn name(&self) -> &'static str;

    /// Accepted parameter keys.
    fn param_names(&self) -> &'static [&'static str];

    /// Defaults for a robot of the given weight (N).
    fn default_params(&self, weight: f64) -> ParamTable;

    /// Parameter that bounds the thrust command; maximum thrust is
    /// proportional to it.
    fn thrust_limit_param(&self) -> &'static str;

    fn build(&self, params: &ParamTable) -> Result<Box<dyn Mixer>, AllocationError>;
}

fn lookup(params: &ParamTable, key: &str) -> Result<f64, AllocationError> {
    params
        .get(key)
        .copied()
        .ok_or_else(|| AllocationError::MissingParam(key.to_string()))
}

fn check_keys(mixer: &str, params: &ParamTable, known: &[&str]) -> Result<(), AllocationError> {
    match params.keys().find(|k| !known.contains(&k.as_str())) {
        Some(k) => Err(AllocationError::UnknownParam {
            mixer: mixer.to_string(),
            key: k.clone(),
        }),
        None => Ok(()),
    }
}

fn table(pairs: &[(&str, f64)]) -> ParamTable {
    pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

/// Full-command thrust over weight for the default two-winged mixer.
pub const ROBOBEE_LIFT_TO_WEIGHT: f64 = 137.0 / 75.0;
/// Full-command thrust over weight for the default four-winged mixer.
pub const BEEPLUS_LIFT_TO_WEIGHT: f64 = 1.3;

pub struct RoboBeeMixerBuilder;

impl MixerBuilder for RoboBeeMixerBuilder {
    fn name(&self) -> &'static str {
        RobotKind::RoboBee.as_str()
    }

    fn param_names(&self) -> &'static [&'static str] {
        &["k_amp", "k_roll", "k_pitch", "k_yaw", "amp_max", "roll_max", "pitch_max", "yaw_max"]
    }

    fn default_params(&self, weight: f64) -> ParamTable {
        // Normalized command units; full amplitude lifts 137/75 of the
        // weight. The yaw channel is deliberately weak.
        table(&[
            ("k_amp", ROBOBEE_LIFT_TO_WEIGHT * weight),
            ("k_roll", 2.0e-6),
            ("k_pitch", 2.0e-6),
            ("k_yaw", 2.0e-7),
            ("amp_max", 1.0),
            ("roll_max", 1.0),
            ("pitch_max", 1.0),
            ("yaw_max", 1.0),
        ])
    }

    fn thrust_limit_param(&self) -> &'static str {
        "amp_max"
    }

    fn build(&self, params: &ParamTable) -> Result<Box<dyn Mixer>, AllocationError> {
        check_keys(self.name(), params, self.param_names())?;
        let get = |k| lookup(params, k);
        Ok(Box::new(RoboBeeMixer {
            params: RoboBeeMixParams::new(get("k_amp")?, get("k_roll")?, get("k_pitch")?, get("k_yaw")?)?,
            limits: RoboBeeLimits {
                amp_max: positive("amp_max", get("amp_max")?)?,
                roll_max: positive("roll_max", get("roll_max")?)?,
                pitch_max: positive("pitch_max", get("pitch_max")?)?,
                yaw_max: positive("yaw_max", get("yaw_max")?)?,
            },
        }))
    }
}

pub struct BeePlusMixerBuilder;

impl MixerBuilder for BeePlusMixerBuilder {
    fn name(&self) -> &'static str {
        RobotKind::BeePlus.as_str()
    }

    fn param_names(&self) -> &'static [&'static str] {
        &["k_f", "k_s", "d1", "d2", "d3", "v_max"]
    }

    fn default_params(&self, weight: f64) -> ParamTable {
        // 4 · k_f · v_max = BEEPLUS_LIFT_TO_WEIGHT · weight with v_max = 1.
        let k_f = BEEPLUS_LIFT_TO_WEIGHT * weight / 4.0;
        table(&[
            ("k_f", k_f),
            ("k_s", 0.1 * k_f),
            ("d1", 0.006),
            ("d2", 0.006),
            ("d3", 0.006),
            ("v_max", 1.0),
        ])
    }

    fn thrust_limit_param(&self) -> &'static str {
        "v_max"
    }

    fn build(&self, params: &ParamTable) -> Result<Box<dyn Mixer>, AllocationError> {
        check_keys(self.name(), params, self.param_names())?;
        let get = |k| lookup(params, k);
        Ok(Box::new(BeePlusMixer {
            params: BeePlusMixParams::new(get("k_f")?, get("k_s")?, get("d1")?, get("d2")?, get("d3")?)?,
            v_max: positive("v_max", get("v_max")?)?,
        }))
    }
}

/// Name → builder lookup for mixers.
#[derive(Clone)]
pub struct MixerRegistry {
    builders: HashMap<&'static str, Arc<dyn MixerBuilder>>,
}

impl Default for MixerRegistry {
    fn default() -> Self {
        Self::builtin()
    }
}

impl MixerRegistry {
    pub fn empty() -> Self {
        Self {
            builders: HashMap::new(),
        }
    }

    /// Registry holding the two built-in robots.
    pub fn builtin() -> Self {
        let mut r = Self::empty();
        r.register(Arc::new(RoboBeeMixerBuilder));
        r.register(Arc::new(BeePlusMixerBuilder));
        r
    }

    pub fn register(&mut self, builder: Arc<dyn MixerBuilder>) {
        self.builders.insert(builder.name(), builder);
    }

    pub fn get(&self, name: &str) -> Result<Arc<dyn MixerBuilder>, AllocationError> {
        self.builders
            .get(name)
            .cloned()
            .ok_or_else(|| AllocationError::UnknownMixer(name.to_string()))
    }

    pub fn names(&self) -> Vec<&'static str> {
        let mut n: Vec<_> = self.builders.keys().copied().collect();
        n.sort_unstable();
        n
    }

    pub fn build(&self, name: &str, params: &ParamTable) -> Result<Box<dyn Mixer>, AllocationError> {
        self.get(name)?.build(params)
    }
}
