//! Simulated motion capture and filtered-derivative velocity estimation.
//!
//! Body rates are recovered from sampled attitudes as
//! `[0, ω] = 2 q⁻¹ ∗ D(q)`, where `D` is the approximate differentiator
//! `λs/(s+λ)` applied to each quaternion component. Translational velocity
//! uses the same filter on the position channels.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use thiserror::Error;

use crate::control::StateEstimate;
use crate::dynamics::RigidBodyState;
use crate::quatmath::{Quaternion, UnitQuaternion, Vec3};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EstimationError {
    #[error("filter constant λ must be positive (got {0})")]
    NonPositiveLambda(f64),
    #[error("sample period must be positive (got {0})")]
    NonPositiveDt(f64),
    #[error("λ·dt = {0} violates the bilinear stability margin (must be < 2)")]
    UnstableDiscretization(f64),
    #[error("noise standard deviations must be non-negative")]
    NegativeSigma,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MocapMeasurement {
    pub t: f64,
    pub r_meas: Vec3,
    pub q_meas: UnitQuaternion,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    /// Per-axis position noise (m).
    pub pos_sigma: f64,
    /// Attitude noise magnitude (rad).
    pub angle_sigma: f64,
    pub seed: u64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self {
            pos_sigma: 0.0,
            angle_sigma: 0.0,
            seed: 0,
        }
    }
}

impl NoiseModel {
    pub fn validate(&self) -> Result<(), EstimationError> {
        if !(self.pos_sigma >= 0.0) || !(self.angle_sigma >= 0.0) {
            return Err(EstimationError::NegativeSigma);
        }
        Ok(())
    }
}

/// Seeded motion-capture sensor.
#[derive(Debug, Clone)]
pub struct MocapSensor {
    noise: NoiseModel,
    rng: ChaCha8Rng,
}

impl MocapSensor {
    pub fn new(noise: NoiseModel) -> Result<Self, EstimationError> {
        noise.validate()?;
        Ok(Self {
            noise,
            rng: ChaCha8Rng::seed_from_u64(noise.seed),
        })
    }

    /// Noisy pose sample. With both sigmas zero the state passes through
    /// untouched and no random numbers are drawn.
    pub fn sample(&mut self, s: &RigidBodyState, t: f64) -> MocapMeasurement {
        let mut r_meas = s.r;
        if self.noise.pos_sigma > 0.0 {
            let n = Normal::new(0.0, self.noise.pos_sigma).expect("sigma validated");
            r_meas += Vec3::new(
                n.sample(&mut self.rng),
                n.sample(&mut self.rng),
                n.sample(&mut self.rng),
            );
        }
        let mut q_meas = s.q;
        if self.noise.angle_sigma > 0.0 {
            // Isotropic axis from a normalized Gaussian triple.
            let axis = loop {
                let a = Vec3::new(
                    self.rng.sample(StandardNormal),
                    self.rng.sample(StandardNormal),
                    self.rng.sample(StandardNormal),
                );
                if a.norm() > 1e-9 {
                    break a;
                }
            };
            let angle: f64 = self.noise.angle_sigma * self.rng.sample::<f64, _>(StandardNormal);
            let dq = UnitQuaternion::from_axis_angle(axis, angle).expect("non-zero axis");
            q_meas = (dq * s.q)
                .quaternion()
                .normalize()
                .expect("product of unit quaternions");
        }
        MocapMeasurement { t, r_meas, q_meas }
    }
}

pub fn mocap_sample(sensor: &mut MocapSensor, s: &RigidBodyState, t: f64) -> MocapMeasurement {
    sensor.sample(s, t)
}

/// Tustin discretization of `λs/(s+λ)`:
/// `y[n] = a·y[n−1] + b·(x[n] − x[n−1])`, `a = (2−λT)/(2+λT)`, `b = 2λ/(2+λT)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivativeFilter {
    lambda: f64,
    dt: f64,
    a: f64,
    b: f64,
    prev_input: Option<f64>,
    output: f64,
}

impl DerivativeFilter {
    pub fn new(lambda: f64, dt: f64) -> Result<Self, EstimationError> {
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(EstimationError::NonPositiveLambda(lambda));
        }
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(EstimationError::NonPositiveDt(dt));
        }
        let ldt = lambda * dt;
        if ldt >= 2.0 {
            return Err(EstimationError::UnstableDiscretization(ldt));
        }
        Ok(Self {
            lambda,
            dt,
            a: (2.0 - ldt) / (2.0 + ldt),
            b: 2.0 * lambda / (2.0 + ldt),
            prev_input: None,
            output: 0.0,
        })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Feed one sample. The first sample seeds the state with a zero
    /// derivative.
    pub fn step(&mut self, x: f64) -> f64 {
        let prev = self.prev_input.replace(x).unwrap_or(x);
        self.output = self.a * self.output + self.b * (x - prev);
        self.output
    }

    pub fn output(&self) -> f64 {
        self.output
    }

    pub fn reset(&mut self) {
        self.prev_input = None;
        self.output = 0.0;
    }
}

pub fn filter_step(f: &mut DerivativeFilter, x: f64) -> f64 {
    f.step(x)
}

/// `[s, ω] = 2 q⁻¹ ∗ q̇_f`. Returns `ω` and the scalar residual `s`, which is
/// zero in continuous time and reported only as a diagnostic.
pub fn estimate_omega(q_meas: UnitQuaternion, qdot_filtered: Quaternion) -> (Vec3, f64) {
    let p = (q_meas.inverse().quaternion() * qdot_filtered).scale(2.0);
    (p.v, p.w)
}

/// Three synchronized derivative filters on position.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VelocityEstimator {
    channels: [DerivativeFilter; 3],
}

impl VelocityEstimator {
    pub fn new(lambda: f64, dt: f64) -> Result<Self, EstimationError> {
        let f = DerivativeFilter::new(lambda, dt)?;
        Ok(Self { channels: [f; 3] })
    }

    pub fn step(&mut self, r_meas: Vec3) -> Vec3 {
        let r = r_meas.to_array();
        Vec3::new(
            self.channels[0].step(r[0]),
            self.channels[1].step(r[1]),
            self.channels[2].step(r[2]),
        )
    }
}

pub fn estimate_velocity(est: &mut VelocityEstimator, r_meas: Vec3) -> Vec3 {
    est.step(r_meas)
}

/// Four synchronized derivative filters on the attitude quaternion, with
/// hemisphere continuity enforced on the incoming samples.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AngularRateEstimator {
    channels: [DerivativeFilter; 4],
    last_q: Option<UnitQuaternion>,
}

impl AngularRateEstimator {
    pub fn new(lambda: f64, dt: f64) -> Result<Self, EstimationError> {
        let f = DerivativeFilter::new(lambda, dt)?;
        Ok(Self {
            channels: [f; 4],
            last_q: None,
        })
    }

    /// Returns the sign-continuous attitude, `ω` and the scalar residual.
    pub fn step(&mut self, q_meas: UnitQuaternion) -> (UnitQuaternion, Vec3, f64) {
        let q = match self.last_q {
            Some(prev) if prev.quaternion().dot(q_meas.quaternion()) < 0.0 => q_meas.negate(),
            _ => q_meas,
        };
        self.last_q = Some(q);
        let c = q.quaternion().to_array();
        let qdot = Quaternion::from_array([
            self.channels[0].step(c[0]),
            self.channels[1].step(c[1]),
            self.channels[2].step(c[2]),
            self.channels[3].step(c[3]),
        ]);
        let (omega, residual) = estimate_omega(q, qdot);
        (q, omega, residual)
    }
}

/// Full pose/rate estimator driven by motion-capture samples.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateEstimator {
    velocity: VelocityEstimator,
    rate: AngularRateEstimator,
    latest: Option<StateEstimate>,
    residual: f64,
}

impl StateEstimator {
    pub fn new(lambda: f64, dt: f64) -> Result<Self, EstimationError> {
        Ok(Self {
            velocity: VelocityEstimator::new(lambda, dt)?,
            rate: AngularRateEstimator::new(lambda, dt)?,
            latest: None,
            residual: 0.0,
        })
    }

    pub fn update(&mut self, m: &MocapMeasurement) -> StateEstimate {
        let v = self.velocity.step(m.r_meas);
        let (q, omega, residual) = self.rate.step(m.q_meas);
        let est = StateEstimate {
            r: m.r_meas,
            v,
            q,
            omega,
        };
        self.latest = Some(est);
        self.residual = residual;
        est
    }

    /// Most recent estimate (held between samples).
    pub fn latest(&self) -> Option<StateEstimate> {
        self.latest
    }

    /// Scalar part of `2 q⁻¹ ∗ q̇_f` from the latest update.
    pub fn residual(&self) -> f64 {
        self.residual
    }
}
