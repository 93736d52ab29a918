//! Quaternion-based flight control for insect-scale flapping-wing robots.
//!
//! - [`quatmath`]: vectors, matrices and unit quaternions.
//! - [`dynamics`]: rigid-body model and RK4 integration.
//! - [`allocation`]: wrench to actuator-command mixers.
//! - [`control`]: attitude and position control laws.
//! - [`estimation`]: motion-capture model and derivative filters.
//! - [`harness`]: scenarios, simulation loop, logs and metrics.

pub mod allocation;
pub mod control;
pub mod dynamics;
pub mod estimation;
pub mod harness;
pub mod quatmath;
