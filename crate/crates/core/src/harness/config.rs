//! Flat `section.key = value` configuration text.
//!
//! Grammar, one entry per line:
//!
//! ```text
//! line    := blank | comment | entry
//! comment := '#' any*
//! entry   := key ws* '=' ws* value ws* comment?
//! key     := [a-z0-9_]+ ('.' [a-z0-9_]+)+
//! value   := number | integer | word | vector
//! vector  := number (',' number)*      # 3 entries, 4 for initial.q
//! ```
//!
//! `scenario.name` selects the built-in scenario whose values every other key
//! overrides. Changing `robot.kind` away from the scenario's robot resets the
//! airframe, mixer table and gains to that robot's defaults before the
//! remaining keys are applied. If any `setpoint.N.*` key appears, the
//! schedule is truncated to indices `0..=max N`.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use super::scenarios::{custom_config, robot_defaults};
use super::{HarnessError, ScenarioConfig, ScenarioRegistry, Waypoint, CUSTOM};
use crate::allocation::MixerRegistry;
use crate::dynamics::RobotKind;
use crate::quatmath::{Mat3, Quaternion, UnitQuaternion, Vec3};

/// Named configuration text; the name is used in error messages.
#[derive(Debug, Clone)]
pub struct ConfigSource {
    pub name: String,
    pub text: String,
}

impl ConfigSource {
    pub fn new(name: impl Into<String>, text: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            text: text.into(),
        }
    }
}

#[derive(Debug, Clone)]
struct Entry<'a> {
    source: &'a str,
    line: usize,
    key: &'a str,
    value: &'a str,
}

impl Entry<'_> {
    fn error(&self, message: impl Into<String>) -> HarnessError {
        HarnessError::Field {
            source_name: self.source.to_string(),
            line: self.line,
            key: self.key.to_string(),
            message: message.into(),
        }
    }

    fn number<T: FromStr>(&self) -> Result<T, HarnessError> {
        self.value
            .parse()
            .map_err(|_| self.error(format!("`{}` is not a valid number", self.value)))
    }

    fn real(&self) -> Result<f64, HarnessError> {
        let v: f64 = self.number()?;
        if !v.is_finite() {
            return Err(self.error("value must be finite"));
        }
        Ok(v)
    }

    fn reals<const N: usize>(&self) -> Result<[f64; N], HarnessError> {
        let parts: Vec<&str> = self.value.split(',').map(str::trim).collect();
        if parts.len() != N {
            return Err(self.error(format!(
                "expected {N} comma-separated numbers, found {}",
                parts.len()
            )));
        }
        let mut out = [0.0; N];
        for (o, p) in out.iter_mut().zip(parts) {
            *o = p
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| self.error(format!("`{p}` is not a finite number")))?;
        }
        Ok(out)
    }

    fn vec3(&self) -> Result<Vec3, HarnessError> {
        Ok(Vec3::from_array(self.reals::<3>()?))
    }

    fn keyword<T: FromStr<Err = String>>(&self) -> Result<T, HarnessError> {
        self.value.parse().map_err(|e: String| self.error(e))
    }
}

fn valid_key(key: &str) -> bool {
    let mut segments = key.split('.');
    let ok_segment = |s: &str| {
        !s.is_empty()
            && s
                .chars()
                .all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_')
    };
    segments.clone().count() >= 2 && segments.all(ok_segment)
}

fn tokenize(src: &ConfigSource) -> Result<Vec<Entry<'_>>, HarnessError> {
    let mut entries = Vec::new();
    for (i, raw) in src.text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let parse_error = |message: String| HarnessError::Parse {
            source_name: src.name.clone(),
            line,
            message,
        };
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| parse_error(format!("expected `section.key = value`, found `{content}`")))?;
        let (key, value) = (key.trim(), value.trim());
        if !valid_key(key) {
            return Err(parse_error(format!("malformed key `{key}`")));
        }
        if value.is_empty() {
            return Err(parse_error(format!("missing value for `{key}`")));
        }
        entries.push(Entry {
            source: &src.name,
            line,
            key,
            value,
        });
    }
    Ok(entries)
}

/// Parse configuration sources in order; later entries win.
pub fn read_config(sources: &[ConfigSource]) -> Result<ScenarioConfig, HarnessError> {
    let mut entries = Vec::new();
    for s in sources {
        entries.extend(tokenize(s)?);
    }

    let registry = ScenarioRegistry::builtin();
    let mut cfg = match entries.iter().rev().find(|e| e.key == "scenario.name") {
        Some(e) => registry
            .config(e.value)
            .map_err(|_| e.error(format!("unknown scenario `{}`", e.value)))?,
        None => registry.config(CUSTOM)?,
    };
    if let Some(e) = entries.iter().rev().find(|e| e.key == "robot.kind") {
        let kind: RobotKind = e.keyword()?;
        if kind != cfg.robot.kind {
            if cfg.scenario == CUSTOM {
                cfg = custom_config(kind);
            } else {
                let d = robot_defaults(kind);
                cfg.robot = d.robot;
                cfg.mixer = d.mixer;
                cfg.attitude_gains = d.attitude_gains;
                cfg.position_gains = d.position_gains;
            }
        }
    }

    let mixer_keys = MixerRegistry::builtin()
        .get(cfg.robot.kind.as_str())?
        .param_names();
    let mut max_setpoint: Option<usize> = None;
    for e in &entries {
        apply(&mut cfg, e, mixer_keys, &mut max_setpoint)?;
    }
    if let Some(n) = max_setpoint {
        cfg.schedule.waypoints.truncate(n + 1);
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn read_config_file(
    path: &Path,
    overrides: &[String],
) -> Result<ScenarioConfig, HarnessError> {
    let text = std::fs::read_to_string(path)?;
    let mut sources = vec![ConfigSource::new(path.display().to_string(), text)];
    sources.extend(
        overrides
            .iter()
            .enumerate()
            .map(|(i, o)| ConfigSource::new(format!("--override #{}", i + 1), o.clone())),
    );
    read_config(&sources)
}

fn apply(
    cfg: &mut ScenarioConfig,
    e: &Entry<'_>,
    mixer_keys: &[&str],
    max_setpoint: &mut Option<usize>,
) -> Result<(), HarnessError> {
    let (section, rest) = e.key.split_once('.').expect("validated key");
    match (section, rest) {
        ("scenario", "name") => cfg.scenario = e.value.to_string(),
        ("sim", "duration") => cfg.duration = e.real()?,
        ("rates", "physics_hz") => cfg.rates.physics_hz = e.number()?,
        ("rates", "control_hz") => cfg.rates.control_hz = e.number()?,
        ("rates", "mocap_hz") => cfg.rates.mocap_hz = e.number()?,
        ("robot", "kind") => {}
        ("robot", "mass") => cfg.robot.mass = e.real()?,
        ("robot", "gravity") => cfg.robot.gravity = e.real()?,
        ("robot", "inertia") => cfg.robot.inertia = Mat3::diagonal(e.vec3()?),
        ("robot", "flap_freq") => cfg.robot.flap_freq = e.real()?,
        ("ripple", "torque_amp") => cfg.robot.ripple_torque_amp = e.vec3()?,
        ("ripple", "force_amp") => cfg.robot.ripple_force_amp = e.real()?,
        ("mixer", key) => {
            if !mixer_keys.contains(&key) {
                return Err(e.error(format!(
                    "not a parameter of the {} mixer (expected one of: {})",
                    cfg.robot.kind,
                    mixer_keys.join(", ")
                )));
            }
            cfg.mixer.insert(key.to_string(), e.real()?);
        }
        ("noise", "pos_sigma") => cfg.noise.pos_sigma = e.real()?,
        ("noise", "angle_sigma") => cfg.noise.angle_sigma = e.real()?,
        ("noise", "seed") => cfg.noise.seed = e.number()?,
        ("estimation", "lambda") => cfg.lambda = e.real()?,
        ("gains", "k1") => cfg.attitude_gains.k1 = e.vec3()?,
        ("gains", "k2") => cfg.attitude_gains.k2 = e.vec3()?,
        ("gains", "kp") => cfg.position_gains.kp = e.vec3()?,
        ("gains", "kd") => cfg.position_gains.kd = e.vec3()?,
        ("gains", "ki") => cfg.position_gains.ki = e.vec3()?,
        ("gains", "integral_limit") => cfg.position_gains.integral_limit = e.vec3()?,
        ("control", "yaw_mode") => cfg.control.yaw_mode = e.keyword()?,
        ("control", "position_mode") => cfg.control.position_mode = e.keyword()?,
        ("control", "omega_d_frame") => cfg.control.omega_d_frame = e.keyword()?,
        ("control", "f_min_ratio") => cfg.control.f_min_ratio = e.real()?,
        ("initial", "r") => cfg.initial.r = e.vec3()?,
        ("initial", "v") => cfg.initial.v = e.vec3()?,
        ("initial", "omega") => cfg.initial.omega = e.vec3()?,
        ("initial", "q") => {
            let q = Quaternion::from_array(e.reals::<4>()?);
            cfg.initial.q = UnitQuaternion::from_quaternion(q)
                .map_err(|err| e.error(err.to_string()))?;
        }
        ("setpoint", rest) => {
            let (index, field) = rest
                .split_once('.')
                .ok_or_else(|| e.error("expected setpoint.<index>.<field>"))?;
            let index: usize = index
                .parse()
                .map_err(|_| e.error(format!("`{index}` is not a setpoint index")))?;
            if index >= 10_000 {
                return Err(e.error("setpoint index too large"));
            }
            let wps = &mut cfg.schedule.waypoints;
            if wps.len() <= index {
                wps.resize(index + 1, Waypoint::default());
            }
            *max_setpoint = Some(max_setpoint.map_or(index, |m| m.max(index)));
            let w = &mut wps[index];
            match field {
                "t" => w.t = e.real()?,
                "transition" => w.transition = e.keyword()?,
                "r" => w.setpoint.r_d = e.vec3()?,
                "rdot" => w.setpoint.rdot_d = e.vec3()?,
                "rddot" => w.setpoint.rddot_d = e.vec3()?,
                "psi" => w.setpoint.psi_d = e.real()?,
                "omega_hat" => w.setpoint.omega_hat_d = e.vec3()?,
                "tau_d" => w.setpoint.tau_d = e.vec3()?,
                other => return Err(e.error(format!("unknown setpoint field `{other}`"))),
            }
        }
        ("safety", "min") => cfg.safety.min = e.vec3()?,
        ("safety", "max") => cfg.safety.max = e.vec3()?,
        ("metrics", "settle_s") => cfg.settle_s = e.real()?,
        _ => return Err(e.error("unknown key")),
    }
    Ok(())
}

fn v3(v: Vec3) -> String {
    format!("{:?}, {:?}, {:?}", v.x, v.y, v.z)
}

/// Serialize every field; `read_config` of the result reproduces `cfg`.
pub fn write_config(cfg: &ScenarioConfig) -> String {
    let mut s = String::new();
    let mut put = |k: &str, v: String| {
        let _ = writeln!(s, "{k} = {v}");
    };
    put("scenario.name", cfg.scenario.clone());
    put("sim.duration", format!("{:?}", cfg.duration));
    put("rates.physics_hz", cfg.rates.physics_hz.to_string());
    put("rates.control_hz", cfg.rates.control_hz.to_string());
    put("rates.mocap_hz", cfg.rates.mocap_hz.to_string());
    put("robot.kind", cfg.robot.kind.to_string());
    put("robot.mass", format!("{:?}", cfg.robot.mass));
    put("robot.gravity", format!("{:?}", cfg.robot.gravity));
    put("robot.inertia", v3(cfg.robot.inertia.diag()));
    put("robot.flap_freq", format!("{:?}", cfg.robot.flap_freq));
    put("ripple.torque_amp", v3(cfg.robot.ripple_torque_amp));
    put("ripple.force_amp", format!("{:?}", cfg.robot.ripple_force_amp));
    for (k, v) in &cfg.mixer {
        put(&format!("mixer.{k}"), format!("{v:?}"));
    }
    put("noise.pos_sigma", format!("{:?}", cfg.noise.pos_sigma));
    put("noise.angle_sigma", format!("{:?}", cfg.noise.angle_sigma));
    put("noise.seed", cfg.noise.seed.to_string());
    put("estimation.lambda", format!("{:?}", cfg.lambda));
    put("gains.k1", v3(cfg.attitude_gains.k1));
    put("gains.k2", v3(cfg.attitude_gains.k2));
    put("gains.kp", v3(cfg.position_gains.kp));
    put("gains.kd", v3(cfg.position_gains.kd));
    put("gains.ki", v3(cfg.position_gains.ki));
    put("gains.integral_limit", v3(cfg.position_gains.integral_limit));
    put("control.yaw_mode", cfg.control.yaw_mode.to_string());
    put("control.position_mode", cfg.control.position_mode.to_string());
    put("control.omega_d_frame", cfg.control.omega_d_frame.to_string());
    put("control.f_min_ratio", format!("{:?}", cfg.control.f_min_ratio));
    put("initial.r", v3(cfg.initial.r));
    put("initial.v", v3(cfg.initial.v));
    let q = cfg.initial.q.quaternion();
    put("initial.q", format!("{:?}, {:?}, {:?}, {:?}", q.w, q.v.x, q.v.y, q.v.z));
    put("initial.omega", v3(cfg.initial.omega));
    for (i, w) in cfg.schedule.waypoints.iter().enumerate() {
        let sp = &w.setpoint;
        put(&format!("setpoint.{i}.t"), format!("{:?}", w.t));
        put(&format!("setpoint.{i}.transition"), w.transition.to_string());
        put(&format!("setpoint.{i}.r"), v3(sp.r_d));
        put(&format!("setpoint.{i}.rdot"), v3(sp.rdot_d));
        put(&format!("setpoint.{i}.rddot"), v3(sp.rddot_d));
        put(&format!("setpoint.{i}.psi"), format!("{:?}", sp.psi_d));
        put(&format!("setpoint.{i}.omega_hat"), v3(sp.omega_hat_d));
        put(&format!("setpoint.{i}.tau_d"), v3(sp.tau_d));
    }
    put("safety.min", v3(cfg.safety.min));
    put("safety.max", v3(cfg.safety.max));
    put("metrics.settle_s", format!("{:?}", cfg.settle_s));
    s
}
