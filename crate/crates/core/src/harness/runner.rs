//! Multirate closed-loop simulation.
//!
//! Per control tick `k` (time `t = k / control_hz`):
//! 1. every `control_hz / mocap_hz` ticks, sample mocap and update the
//!    estimator;
//! 2. run the controller on the latest estimate;
//! 3. allocate and saturate, recovering the wrench actually produced;
//! 4. log the tick;
//! 5. integrate `physics_hz / control_hz` RK4 substeps with the produced
//!    wrench plus flapping ripple;
//! 6. stop if the position leaves the safety box.

use std::fmt;

use super::{HarnessError, LogRecord, ScenarioConfig};
use crate::control::Controller;
use crate::dynamics::{flap_ripple, step_rk4_with, DynamicsError};
use crate::estimation::{MocapSensor, StateEstimator};
use crate::quatmath::Vec3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Termination {
    Completed,
    /// Position left the safety box at time `t`.
    SafetyExit { t: f64, r: Vec3 },
    /// Non-finite state at time `t`.
    Blowup { t: f64 },
}

impl Termination {
    pub fn is_completed(&self) -> bool {
        matches!(self, Termination::Completed)
    }
}

impl fmt::Display for Termination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Termination::Completed => f.write_str("completed"),
            Termination::SafetyExit { t, r } => {
                write!(f, "safety_exit t={t} r={},{},{}", r.x, r.y, r.z)
            }
            Termination::Blowup { t } => write!(f, "blowup t={t}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RunStats {
    pub control_ticks: u64,
    pub mocap_samples: u64,
    pub physics_steps: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub records: Vec<LogRecord>,
    pub termination: Termination,
    pub stats: RunStats,
}

/// Run and collect every record in memory.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<RunOutput, HarnessError> {
    let mut records = Vec::new();
    let (termination, stats) = run_scenario_streaming(cfg, |r| {
        records.push(*r);
        Ok(())
    })?;
    Ok(RunOutput {
        records,
        termination,
        stats,
    })
}

/// Run, handing each record to `sink` as it is produced.
pub fn run_scenario_streaming<F>(
    cfg: &ScenarioConfig,
    mut sink: F,
) -> Result<(Termination, RunStats), HarnessError>
where
    F: FnMut(&LogRecord) -> Result<(), HarnessError>,
{
    cfg.validate()?;
    let ticks = cfg.control_ticks()?;
    let mixer = cfg.build_mixer()?;
    let robot = &cfg.robot;
    let rates = cfg.rates;
    let substeps = u64::from(rates.physics_hz / rates.control_hz);
    let decimation = u64::from(rates.control_hz / rates.mocap_hz);
    let dt_control = 1.0 / f64::from(rates.control_hz);
    let dt_physics = 1.0 / f64::from(rates.physics_hz);

    let mut sensor = MocapSensor::new(cfg.noise)?;
    let mut estimator = StateEstimator::new(cfg.lambda, 1.0 / f64::from(rates.mocap_hz))?;
    let mut controller = Controller::new(cfg.attitude_gains, cfg.position_gains, cfg.control)?;
    let mut state = cfg.initial;
    let mut stats = RunStats::default();

    for k in 0..ticks {
        let t = k as f64 * dt_control;
        if k % decimation == 0 {
            let m = sensor.sample(&state, t);
            estimator.update(&m);
            stats.mocap_samples += 1;
        }
        let est = estimator.latest().expect("sampled on tick 0");
        let sp = cfg.schedule.at(t);
        let out = controller.step(&est, &sp, robot, dt_control);
        let (cmd, flags, applied) = mixer.realize(&out.wrench);

        let (roll, pitch, yaw) = state.q.euler_zyx();
        sink(&LogRecord {
            t,
            r: state.r,
            v: state.v,
            q: state.q.quaternion().to_array(),
            euler_deg: Vec3::new(roll, pitch, yaw).map(f64::to_degrees),
            omega: state.omega,
            est_r: est.r,
            est_v: est.v,
            est_q: est.q.quaternion().to_array(),
            est_omega: est.omega,
            est_qres: estimator.residual(),
            r_d: sp.r_d,
            v_d: sp.rdot_d,
            psi_d: out.psi_d,
            f_cmd: out.wrench.thrust,
            tau_cmd: out.wrench.torque,
            q_d: out.q_d.quaternion().to_array(),
            u: cmd.0,
            sat: flags.0,
            f_app: applied.thrust,
            tau_app: applied.torque,
        })?;
        stats.control_ticks += 1;

        for j in 0..substeps {
            let t_sub = (k * substeps + j) as f64 * dt_physics;
            match step_rk4_with(&state, robot, t_sub, dt_physics, |tt| applied + flap_ripple(tt, robot)) {
                Ok(s) => state = s,
                Err(DynamicsError::Blowup { t }) => return Ok((Termination::Blowup { t }, stats)),
                Err(e) => return Err(e.into()),
            }
            stats.physics_steps += 1;
        }
        if !cfg.safety.contains(state.r) {
            let t_exit = (k + 1) as f64 * dt_control;
            return Ok((Termination::SafetyExit { t: t_exit, r: state.r }, stats));
        }
    }
    Ok((Termination::Completed, stats))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::{ScenarioRegistry, CUSTOM};

    fn short_custom() -> ScenarioConfig {
        let mut c = ScenarioRegistry::builtin().config(CUSTOM).unwrap();
        c.duration = 0.05;
        c
    }

    #[test]
    fn tick_and_sample_counts() {
        let out = run_scenario(&short_custom()).unwrap();
        assert_eq!(out.termination, Termination::Completed);
        assert_eq!(out.stats.control_ticks, 100);
        assert_eq!(out.stats.mocap_samples, 25);
        assert_eq!(out.stats.physics_steps, 500);
        assert_eq!(out.records.len(), 100);
        assert_eq!(out.records[1].t, 5e-4);
    }

    #[test]
    fn safety_exit_is_reported() {
        let mut c = short_custom();
        c.duration = 1.0;
        c.schedule.waypoints[0].setpoint.r_d.z = 0.6;
        c.safety.max.z = 0.35;
        let out = run_scenario(&c).unwrap();
        match out.termination {
            Termination::SafetyExit { t, r } => {
                assert!(t < 1.0);
                assert!(r.z > 0.35);
            }
            other => panic!("{other:?}"),
        }
        assert!(out.records.len() < 2000);
    }

    #[test]
    fn sink_errors_propagate() {
        let err = run_scenario_streaming(&short_custom(), |_| Err(HarnessError::Log("full".into())));
        assert!(matches!(err, Err(HarnessError::Log(_))));
    }
}
