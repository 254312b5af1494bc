//! Fixed-step loop producing the true capsule trajectory for a scenario.

use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::analysis::{Stage, TrackRecord, TrackSample};
use crate::control::{ActuationSchedule, Pose2, ScheduleBuilder, StepperModel};
use crate::dynamics::{
    self, Axis, CapsuleState, Command, DynamicsParams, ExternalTorques, TorqueLaw,
};
use crate::environment::{load_torque, slip_check, traction_required, Surface};
use crate::error::{invalid, Result};
use crate::field::{ActuatorMagnet, ActuatorModel};
use crate::geometry::BodyProperties;
use crate::Vec3;

/// Gap below which two slipping intervals count as one episode, s.
pub const SLIP_MERGE_TIME: f64 = 0.02;

/// Static thresholds; `None` derives them from the surface.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Thresholds {
    pub tau_s_yaw: Option<f64>,
    pub tau_s_roll: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationSetup {
    pub body: BodyProperties,
    /// Net moment magnitude of the coat, A·m².
    pub net_moment: f64,
    pub actuator: ActuatorMagnet,
    pub surface: Surface,
    pub schedule: ActuationSchedule,
    pub start: Pose2,
    /// s; the last command is held past the schedule end.
    pub duration: f64,
    pub dt: f64,
    /// Damping coefficients `(c_ψ, c_α)`; `None` uses the ζ = 0.7 mid-band rule.
    pub damping: Option<(f64, f64)>,
    pub torque_law: TorqueLaw,
    /// Overrides the geometric rolling radius in the no-slip kinematics.
    pub effective_rolling_radius: Option<f64>,
    pub thresholds: Thresholds,
    pub seed: u64,
    /// Keep every n-th integration step in the output.
    pub record_every: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationResult {
    pub states: Vec<CapsuleState>,
    /// Slip episodes; steps closer than [`SLIP_MERGE_TIME`] belong to one episode.
    pub slip_events: usize,
    pub slip_steps: usize,
    /// Peak roll torque available from the field over the run, N·m.
    pub peak_mb: f64,
    pub params: DynamicsParams,
}

impl SimulationResult {
    pub fn final_state(&self) -> &CapsuleState {
        self.states
            .last()
            .expect("at least the initial state is recorded")
    }

    /// Straight-line distance from the first to the last recorded position, m.
    pub fn net_displacement(&self) -> f64 {
        let (a, b) = (self.states[0], *self.final_state());
        (b.x - a.x).hypot(b.y - a.y)
    }

    pub fn true_track(&self, scenario_id: &str) -> Result<TrackRecord> {
        let samples = self
            .states
            .iter()
            .map(|s| TrackSample {
                t: s.t,
                x: s.x,
                y: s.y,
                heading: s.psi,
            })
            .collect();
        TrackRecord::new(scenario_id, Stage::Raw, samples)
    }
}

/// Hold the heading and roll at the motor rate for `duration` seconds.
pub fn roll_schedule(
    heading: f64,
    motor: &StepperModel,
    duration: f64,
    quantize: bool,
) -> ActuationSchedule {
    let mut b = ScheduleBuilder::new(
        Command {
            phi: heading,
            gamma: 0.0,
        },
        quantize,
    );
    b.ramp_for(motor, Axis::Roll, 1.0, duration);
    b.build()
}

fn field_magnitude(actuator: &ActuatorMagnet, state: &CapsuleState, height: f64) -> Result<f64> {
    match actuator.model {
        ActuatorModel::UniformField { field_magnitude } => Ok(field_magnitude),
        ActuatorModel::PointDipole { .. } => Ok(actuator
            .field_at(&Vec3::new(state.x, state.y, height))?
            .norm()),
    }
}

/// Integrate the scenario from `start` for `duration` seconds.
pub fn simulate(setup: &SimulationSetup) -> Result<SimulationResult> {
    setup.body.validate()?;
    setup.surface.validate()?;
    setup.schedule.validate()?;
    if !(setup.net_moment >= 0.0 && setup.net_moment.is_finite()) {
        return Err(invalid(
            "SimulationSetup",
            "net moment must be finite and non-negative",
        ));
    }
    if !(setup.duration >= 0.0 && setup.dt > 0.0) {
        return Err(invalid(
            "SimulationSetup",
            "duration must be non-negative and dt positive",
        ));
    }
    if setup.record_every == 0 {
        return Err(invalid(
            "SimulationSetup",
            "record_every must be at least 1",
        ));
    }
    let body = &setup.body;
    let surface = &setup.surface;
    let mut params = DynamicsParams::reference(setup.net_moment, 0.0);
    params.i_psi = body.inertia_yaw;
    params.i_alpha = body.inertia_roll;
    params.mass = body.mass;
    params.rolling_radius = setup
        .effective_rolling_radius
        .unwrap_or(body.rolling_radius);
    params.torque_law = setup.torque_law;
    params.mu = surface.mu_effective();
    params.tau_s_yaw = setup
        .thresholds
        .tau_s_yaw
        .unwrap_or_else(|| surface.yaw_threshold(body));
    params.tau_s_roll = setup
        .thresholds
        .tau_s_roll
        .unwrap_or_else(|| surface.roll_threshold(body));
    if let Some((c_psi, c_alpha)) = setup.damping {
        params.c_psi = c_psi;
        params.c_alpha = c_alpha;
    } else {
        let mb_mid = dynamics::MID_MOMENT * dynamics::REFERENCE_FIELD;
        params.c_psi =
            dynamics::critical_fraction_damping(dynamics::DEFAULT_ZETA, body.inertia_yaw, mb_mid);
        params.c_alpha =
            dynamics::critical_fraction_damping(dynamics::DEFAULT_ZETA, body.inertia_roll, mb_mid);
    }
    params.validate()?;

    let mut rng = ChaCha8Rng::seed_from_u64(setup.seed);
    let texture = surface.texture;
    let decay = (-setup.dt / texture.correlation_time).exp();
    let kick = texture.sigma * (1.0 - decay * decay).sqrt();
    let mut disturbance = if texture.sigma > 0.0 {
        texture.sigma * Distribution::<f64>::sample(&StandardNormal, &mut rng)
    } else {
        0.0
    };

    let steps = (setup.duration / setup.dt).round() as usize;
    let mut state = CapsuleState::at(setup.start.x, setup.start.y, setup.start.psi);
    let mut states = Vec::with_capacity(steps / setup.record_every + 2);
    states.push(state);
    let (mut slip_events, mut slip_steps) = (0, 0);
    let merge_steps = (SLIP_MERGE_TIME / setup.dt).ceil() as usize;
    let mut last_slip: Option<usize> = None;
    let mut peak_mb: f64 = 0.0;
    let height = body.rolling_radius;

    for k in 0..steps {
        let command = setup.schedule.command_at(state.t);
        let b = field_magnitude(&setup.actuator, &state, height)?;
        params.mb_yaw = setup.net_moment * b;
        params.mb_roll = params.mb_yaw;
        peak_mb = peak_mb.max(params.mb_roll);
        let contact = load_torque(surface, &state, body)?;

        let demand = traction_required(contact.tau_load, body.rolling_radius);
        let slipping = slip_check(demand, contact.mu_effective, contact.normal_load);
        if slipping {
            slip_steps += 1;
            if last_slip.is_none_or(|j| k - j > merge_steps) {
                slip_events += 1;
            }
            last_slip = Some(k);
        }
        state.slipping = slipping;

        let torques = ExternalTorques {
            roll_load: contact.tau_load,
            yaw_disturbance: contact.yaw_torque + disturbance,
        };
        let before = state;
        state = dynamics::step(&state, &params, command, torques, setup.dt)?;
        if slipping {
            // the contact still transmits μN, so the body creeps forward by that share
            let share = contact.mu_effective * contact.normal_load / demand;
            let ds = share * params.rolling_radius * (state.alpha - before.alpha);
            let heading = 0.5 * (state.psi + before.psi);
            state.x += ds * heading.cos();
            state.y += ds * heading.sin();
        }
        if texture.sigma > 0.0 {
            disturbance =
                disturbance * decay + kick * Distribution::<f64>::sample(&StandardNormal, &mut rng);
        }
        if (k + 1) % setup.record_every == 0 || k + 1 == steps {
            states.push(state);
        }
    }
    Ok(SimulationResult {
        states,
        slip_events,
        slip_steps,
        peak_mb,
        params,
    })
}
