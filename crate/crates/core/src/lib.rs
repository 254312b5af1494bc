//! Simulation and analysis toolkit for coating-actuated magnetic capsule robots.
//!
//! The crate is `no_std` (it needs `alloc`) and contains only the numerical
//! machinery:
//!
//! * [`geometry`]: bar and capsule-coat geometry, programmed pole patterns and
//!   their discretization into magnetized cells.
//! * [`field`]: dipole-cell superposition field solver, field maps, net
//!   moments, torques and the external actuator magnet.
//! * [`dynamics`]: 2-DOF yaw/roll equations of motion with stick-slip onset,
//!   integrated with fixed-step RK4, plus second-order transfer-function
//!   analytics.
//! * [`control`]: stepper-motor rotation schedules and the yaw-then-roll
//!   waypoint planner.
//! * [`environment`]: test surfaces, load torques, protrusion barriers and slip.
//! * [`sensing`]: synthetic overhead-camera marker stream, affine calibration
//!   and pose reconstruction.
//! * [`analysis`]: density equalization, Hampel spike filtering and the
//!   trajectory error metrics.
//! * [`simulation`]: the fixed-step loop gluing schedule, dynamics and surface
//!   together into a true trajectory.
//!
//! File formats, configuration and the command-line runner live in the
//! `magcoat` companion crate.
#![no_std]
#![forbid(unsafe_code)]
// `!(x > 0.0)` guards reject NaN as well
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// float math goes through `num_traits::Float` (libm); when std is in the
// crate graph its inherent methods win and the import goes unused

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod analysis;
pub mod control;
pub mod dynamics;
pub mod environment;
pub mod error;
pub mod field;
pub mod geometry;
pub mod sensing;
pub mod simulation;

pub use error::{Error, Result};

/// Vacuum permeability, T·m/A.
pub const MU0: f64 = 4.0e-7 * core::f64::consts::PI;
/// μ₀/4π, T·m/A.
pub const MU0_OVER_4PI: f64 = 1.0e-7;
/// Standard gravity, m/s².
pub const GRAVITY: f64 = 9.81;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// 3-vector used for positions (m), moments (A·m²), fields (T) and torques (N·m).
pub type Vec3 = nalgebra::Vector3<f64>;
