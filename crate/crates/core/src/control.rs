//! Stepper-driven field-angle schedules and the yaw-then-roll planner.

use alloc::vec::Vec;
use core::f64::consts::PI;
#[allow(unused_imports)]
use num_traits::Float;

use serde::{Deserialize, Serialize};

use crate::dynamics::{Axis, Command};
use crate::error::{domain, invalid, Result};

/// Slack used when flooring angle/step ratios, so exact multiples are not lost to rounding.
const QUANT_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepperModel {
    /// degrees
    pub step_angle: f64,
    /// degrees/s
    pub rate: f64,
    /// Step command interval in 40 MHz clock counts. Metadata only.
    pub command_interval_counts: Option<u64>,
}

impl StepperModel {
    pub fn new(step_angle: f64, rate: f64, command_interval_counts: Option<u64>) -> Result<Self> {
        let m = Self {
            step_angle,
            rate,
            command_interval_counts,
        };
        m.validate()?;
        Ok(m)
    }

    /// Fine-step yaw motor: 0.06° steps at 4°/s.
    pub fn yaw_default() -> Self {
        Self {
            step_angle: 0.06,
            rate: 4.0,
            command_interval_counts: Some(300_000),
        }
    }

    /// Roll motor: 1.8° steps at 60°/s.
    pub fn roll_default() -> Self {
        Self {
            step_angle: 1.8,
            rate: 60.0,
            command_interval_counts: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.step_angle > 0.0 && self.step_angle.is_finite()) {
            return Err(invalid("StepperModel", "step angle must be positive"));
        }
        if !(self.rate >= 0.0 && self.rate.is_finite()) {
            return Err(invalid(
                "StepperModel",
                "rate must be finite and non-negative",
            ));
        }
        Ok(())
    }

    /// Step frequency, Hz.
    pub fn step_frequency(&self) -> f64 {
        self.rate / self.step_angle
    }

    /// Whole steps covered by `angle` degrees (floored toward zero).
    pub fn whole_steps(&self, angle: f64) -> u64 {
        (angle.abs() / self.step_angle + QUANT_EPS).floor() as u64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SchedulePoint {
    pub t: f64,
    pub phi: f64,
    pub gamma: f64,
}

/// Time-ordered field-angle samples.
///
/// Quantized schedules are staircases held between samples; unquantized
/// schedules interpolate linearly.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ActuationSchedule {
    pub samples: Vec<SchedulePoint>,
    pub quantized: bool,
}

impl ActuationSchedule {
    pub fn validate(&self) -> Result<()> {
        for w in self.samples.windows(2) {
            if !(w[1].t > w[0].t) {
                return Err(invalid(
                    "ActuationSchedule",
                    "sample times must be strictly increasing",
                ));
            }
        }
        if self
            .samples
            .iter()
            .any(|s| !(s.t.is_finite() && s.phi.is_finite() && s.gamma.is_finite()))
        {
            return Err(invalid("ActuationSchedule", "samples must be finite"));
        }
        Ok(())
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration(&self) -> f64 {
        match (self.samples.first(), self.samples.last()) {
            (Some(a), Some(b)) => b.t - a.t,
            _ => 0.0,
        }
    }

    pub fn end_time(&self) -> f64 {
        self.samples.last().map_or(0.0, |s| s.t)
    }

    /// Commanded angles at time `t`, clamped to the first and last samples.
    pub fn command_at(&self, t: f64) -> Command {
        let s = &self.samples;
        let Some(first) = s.first() else {
            return Command::default();
        };
        if t <= first.t {
            return Command {
                phi: first.phi,
                gamma: first.gamma,
            };
        }
        // index of the last sample with time <= t
        let i = s.partition_point(|p| p.t <= t) - 1;
        let a = s[i];
        if self.quantized || i + 1 == s.len() {
            return Command {
                phi: a.phi,
                gamma: a.gamma,
            };
        }
        let b = s[i + 1];
        let u = (t - a.t) / (b.t - a.t);
        Command {
            phi: a.phi + u * (b.phi - a.phi),
            gamma: a.gamma + u * (b.gamma - a.gamma),
        }
    }

    /// Number of angle changes between consecutive samples.
    pub fn step_count(&self) -> usize {
        self.samples
            .windows(2)
            .filter(|w| w[0].phi != w[1].phi || w[0].gamma != w[1].gamma)
            .count()
    }
}

/// Incremental schedule construction from a start time and pose.
#[derive(Debug, Clone)]
pub struct ScheduleBuilder {
    quantized: bool,
    t: f64,
    phi: f64,
    gamma: f64,
    samples: Vec<SchedulePoint>,
}

impl ScheduleBuilder {
    pub fn new(start: Command, quantized: bool) -> Self {
        Self {
            quantized,
            t: 0.0,
            phi: start.phi,
            gamma: start.gamma,
            samples: Vec::new(),
        }
    }

    fn push(&mut self, t: f64, phi: f64, gamma: f64) {
        match self.samples.last_mut() {
            Some(last) if t <= last.t => {
                last.phi = phi;
                last.gamma = gamma;
            }
            _ => self.samples.push(SchedulePoint { t, phi, gamma }),
        }
    }

    fn mark_start(&mut self) {
        if self.samples.is_empty() {
            self.push(self.t, self.phi, self.gamma);
        }
    }

    /// Keep the current angles for `duration` seconds.
    pub fn hold(&mut self, duration: f64) -> &mut Self {
        if duration > 0.0 {
            self.mark_start();
            self.t += duration;
            self.push(self.t, self.phi, self.gamma);
        }
        self
    }

    /// Rotate one axis by `delta` rad at the motor's rate.
    pub fn ramp(&mut self, motor: &StepperModel, axis: Axis, delta: f64) -> &mut Self {
        let rate = motor.rate.to_radians();
        if delta == 0.0 || rate <= 0.0 {
            return self;
        }
        self.ramp_for(motor, axis, delta.signum(), delta.abs() / rate)
    }

    /// Rotate one axis at the motor rate in direction `sign` for `duration` seconds.
    pub fn ramp_for(
        &mut self,
        motor: &StepperModel,
        axis: Axis,
        sign: f64,
        duration: f64,
    ) -> &mut Self {
        if !(duration > 0.0) {
            return self;
        }
        self.mark_start();
        let rate = motor.rate.to_radians();
        let (t0, phi0, gamma0) = (self.t, self.phi, self.gamma);
        let set = |phi: &mut f64, gamma: &mut f64, v: f64| match axis {
            Axis::Yaw => *phi = v,
            Axis::Roll => *gamma = v,
        };
        let start = match axis {
            Axis::Yaw => phi0,
            Axis::Roll => gamma0,
        };
        if self.quantized {
            let step = motor.step_angle.to_radians();
            let n = motor.whole_steps((rate * duration).to_degrees());
            let dt_step = step / rate;
            for k in 1..=n {
                let (mut phi, mut gamma) = (phi0, gamma0);
                set(&mut phi, &mut gamma, start + sign * k as f64 * step);
                self.push(t0 + k as f64 * dt_step, phi, gamma);
                self.phi = phi;
                self.gamma = gamma;
            }
            self.t = t0 + duration;
            self.push(self.t, self.phi, self.gamma);
        } else {
            let (mut phi, mut gamma) = (phi0, gamma0);
            set(&mut phi, &mut gamma, start + sign * rate * duration);
            self.t = t0 + duration;
            self.phi = phi;
            self.gamma = gamma;
            self.push(self.t, phi, gamma);
        }
        self
    }

    pub fn current(&self) -> Command {
        Command {
            phi: self.phi,
            gamma: self.gamma,
        }
    }

    pub fn build(self) -> ActuationSchedule {
        ActuationSchedule {
            samples: self.samples,
            quantized: self.quantized,
        }
    }
}

/// Single-axis ramp `angle(t) = rate·t` from zero.
pub fn constant_rate_schedule(
    motor: &StepperModel,
    axis: Axis,
    duration: f64,
    quantize: bool,
) -> Result<ActuationSchedule> {
    motor.validate()?;
    if !(duration >= 0.0 && duration.is_finite()) {
        return Err(domain("duration must be finite and non-negative"));
    }
    let mut b = ScheduleBuilder::new(Command::default(), quantize);
    if motor.rate > 0.0 {
        b.ramp_for(motor, axis, 1.0, duration);
    } else {
        b.hold(duration);
    }
    Ok(b.build())
}

/// Planar pose used by the planner: position in m, heading in rad.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Pose2 {
    pub x: f64,
    pub y: f64,
    pub psi: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Leg {
    /// rad
    pub yaw_target: f64,
    /// rad
    pub roll_angle: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct WaypointPlan {
    pub initial_heading: f64,
    pub legs: Vec<Leg>,
}

/// Signed angle in `(-π, π]` rotating `from` onto `to`.
pub fn shortest_angle(from: f64, to: f64) -> f64 {
    let mut d = (to - from) % (2.0 * PI);
    if d <= -PI {
        d += 2.0 * PI;
    } else if d > PI {
        d -= 2.0 * PI;
    }
    d
}

/// Yaw to face the target, then roll `distance / R`.
pub fn plan_to_target(current: Pose2, target: (f64, f64), radius: f64) -> Result<WaypointPlan> {
    plan_through(current, &[target], radius)
}

/// Chain yaw-then-roll legs through several waypoints.
pub fn plan_through(current: Pose2, targets: &[(f64, f64)], radius: f64) -> Result<WaypointPlan> {
    if !(radius > 0.0) {
        return Err(domain("rolling radius must be positive"));
    }
    let mut legs = Vec::new();
    let (mut x, mut y) = (current.x, current.y);
    for &(tx, ty) in targets {
        let (dx, dy) = (tx - x, ty - y);
        let dist = (dx * dx + dy * dy).sqrt();
        if dist == 0.0 {
            continue;
        }
        legs.push(Leg {
            yaw_target: dy.atan2(dx),
            roll_angle: dist / radius,
        });
        x = tx;
        y = ty;
    }
    Ok(WaypointPlan {
        initial_heading: current.psi,
        legs,
    })
}

/// Sequential yaw and roll ramps realizing a plan.
pub fn plan_to_schedule(
    plan: &WaypointPlan,
    yaw_motor: &StepperModel,
    roll_motor: &StepperModel,
    quantize: bool,
) -> Result<ActuationSchedule> {
    yaw_motor.validate()?;
    roll_motor.validate()?;
    if plan
        .legs
        .iter()
        .any(|l| !(l.roll_angle.is_finite() && l.yaw_target.is_finite()))
    {
        return Err(invalid("WaypointPlan", "leg angles must be finite"));
    }
    let mut b = ScheduleBuilder::new(
        Command {
            phi: plan.initial_heading,
            gamma: 0.0,
        },
        quantize,
    );
    for leg in &plan.legs {
        let delta = shortest_angle(b.current().phi, leg.yaw_target);
        b.ramp(yaw_motor, Axis::Yaw, delta);
        b.ramp(roll_motor, Axis::Roll, leg.roll_angle);
    }
    Ok(b.build())
}
