//! Planar yaw/roll dynamics of the coated capsule.
//!
//! Each degree of freedom is a torsional spring-damper driven by the
//! magnetic restoring torque:
//!
//! ```text
//! I_ψ ψ̈ + c_ψ ψ̇ = τ_m(φ − ψ) + τ_dist
//! I_α α̈ + c_α α̇ = τ_m(γ − α) − τ_load
//! ```
//!
//! with a static threshold that holds a DOF at rest until the net applied
//! torque exceeds it. Integration is fixed-step RK4.

use core::f64::consts::PI;
#[allow(unused_imports)]
use num_traits::Float;

use serde::{Deserialize, Serialize};

use crate::error::{domain, invalid, Error, Result};

/// Default integration step, s.
pub const DEFAULT_DT: f64 = 2.0e-4;
/// Rate below which a DOF counts as at rest, rad/s.
pub const DEFAULT_RATE_EPSILON: f64 = 1.0e-3;
/// Damping ratio used to derive default damping coefficients.
pub const DEFAULT_ZETA: f64 = 0.7;
/// Midpoint of the net-moment band used for default damping, A·m².
pub const MID_MOMENT: f64 = 0.5 * (0.024 + 0.093);
/// Field magnitude at the capsule for the reference setup, T.
pub const REFERENCE_FIELD: f64 = 0.0308;

/// Magnetic torque as a function of angular misalignment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TorqueLaw {
    /// `mB·e` for every error.
    Linearized,
    /// `mB·e` for `|e| ≤ π/2`, `mB·sin e` beyond.
    Piecewise,
    /// `mB·sin e`.
    #[default]
    Sine,
}

impl TorqueLaw {
    pub fn torque(self, mb: f64, error: f64) -> f64 {
        match self {
            TorqueLaw::Linearized => mb * error,
            TorqueLaw::Piecewise => {
                if error.abs() <= 0.5 * PI {
                    mb * error
                } else {
                    mb * error.sin()
                }
            }
            TorqueLaw::Sine => mb * error.sin(),
        }
    }

    /// Peak torque over all misalignments; infinite for the linear law.
    pub fn saturation(self, mb: f64) -> f64 {
        match self {
            TorqueLaw::Linearized => f64::INFINITY,
            TorqueLaw::Piecewise => mb * 0.5 * PI,
            TorqueLaw::Sine => mb,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DynamicsParams {
    /// Magnetic stiffness, N·m/rad.
    pub mb_yaw: f64,
    pub mb_roll: f64,
    /// Viscous damping, N·m·s/rad.
    pub c_psi: f64,
    pub c_alpha: f64,
    /// kg·m²
    pub i_psi: f64,
    pub i_alpha: f64,
    /// Static thresholds, N·m.
    pub tau_s_yaw: f64,
    pub tau_s_roll: f64,
    /// Rolling-onset coefficient of the current surface.
    pub mu: f64,
    /// Effective rolling radius, m.
    pub rolling_radius: f64,
    /// kg
    pub mass: f64,
    pub torque_law: TorqueLaw,
    /// rad/s
    pub rate_epsilon: f64,
}

impl DynamicsParams {
    /// Reference capsule driven by a net moment `m` in a field `b`, with
    /// damping giving ζ = 0.7 at the mid-band moment and no static friction.
    pub fn reference(m: f64, b: f64) -> Self {
        let mb = m * b;
        let mb_mid = MID_MOMENT * REFERENCE_FIELD;
        let i_psi = crate::geometry::DEFAULT_INERTIA_YAW;
        let i_alpha = crate::geometry::DEFAULT_INERTIA_ROLL;
        Self {
            mb_yaw: mb,
            mb_roll: mb,
            c_psi: critical_fraction_damping(DEFAULT_ZETA, i_psi, mb_mid),
            c_alpha: critical_fraction_damping(DEFAULT_ZETA, i_alpha, mb_mid),
            i_psi,
            i_alpha,
            tau_s_yaw: 0.0,
            tau_s_roll: 0.0,
            mu: 0.0,
            rolling_radius: 7.5e-3,
            mass: 2300.0 * 593.75 * PI * 1e-9,
            torque_law: TorqueLaw::Sine,
            rate_epsilon: DEFAULT_RATE_EPSILON,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [
            self.mb_yaw,
            self.mb_roll,
            self.c_psi,
            self.c_alpha,
            self.i_psi,
            self.i_alpha,
            self.tau_s_yaw,
            self.tau_s_roll,
            self.mu,
            self.rolling_radius,
            self.mass,
            self.rate_epsilon,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(invalid("DynamicsParams", "all parameters must be finite"));
        }
        if !(self.i_psi > 0.0 && self.i_alpha > 0.0) {
            return Err(invalid("DynamicsParams", "inertias must be positive"));
        }
        if self.mb_yaw < 0.0 || self.mb_roll < 0.0 {
            return Err(invalid(
                "DynamicsParams",
                "magnetic stiffness must be non-negative",
            ));
        }
        if self.c_psi < 0.0 || self.c_alpha < 0.0 {
            return Err(invalid("DynamicsParams", "damping must be non-negative"));
        }
        if self.tau_s_yaw < 0.0 || self.tau_s_roll < 0.0 || self.mu < 0.0 {
            return Err(invalid(
                "DynamicsParams",
                "static thresholds must be non-negative",
            ));
        }
        if !(self.rolling_radius > 0.0 && self.mass > 0.0) {
            return Err(invalid(
                "DynamicsParams",
                "rolling radius and mass must be positive",
            ));
        }
        Ok(())
    }

    pub fn yaw(&self) -> SecondOrder {
        SecondOrder {
            stiffness: self.mb_yaw,
            damping: self.c_psi,
            inertia: self.i_psi,
        }
    }

    pub fn roll(&self) -> SecondOrder {
        SecondOrder {
            stiffness: self.mb_roll,
            damping: self.c_alpha,
            inertia: self.i_alpha,
        }
    }

    /// Largest undamped natural frequency of the two DOFs, Hz.
    pub fn max_natural_frequency(&self) -> f64 {
        let f = |mb: f64, i: f64| (mb / i).sqrt() / (2.0 * PI);
        f(self.mb_yaw, self.i_psi).max(f(self.mb_roll, self.i_alpha))
    }

    /// Largest admissible step, `1/(20·f_n,max)`.
    pub fn stability_limit(&self) -> f64 {
        let f = self.max_natural_frequency();
        if f > 0.0 {
            1.0 / (20.0 * f)
        } else {
            f64::INFINITY
        }
    }
}

/// Damping coefficient giving damping ratio `zeta` at stiffness `mb`.
pub fn critical_fraction_damping(zeta: f64, inertia: f64, mb: f64) -> f64 {
    2.0 * zeta * (inertia * mb).sqrt()
}

/// One linear second-order tracker `I θ̈ + c θ̇ + k θ = k θ_cmd`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SecondOrder {
    pub stiffness: f64,
    pub damping: f64,
    pub inertia: f64,
}

/// Gain and phase lag of a tracker at a drive frequency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrequencyResponse {
    pub gain: f64,
    /// rad, positive when the response lags the command.
    pub phase_lag: f64,
}

impl SecondOrder {
    /// rad/s
    pub fn omega_n(&self) -> Result<f64> {
        Ok(2.0 * PI * natural_frequency(self.stiffness, self.inertia)?)
    }

    pub fn zeta(&self) -> Result<f64> {
        damping_ratio(self.damping, self.inertia, self.stiffness)
    }

    /// `ω_n² / (s² + 2ζω_n s + ω_n²)` at `s = i·2πf`.
    pub fn frequency_response(&self, f_cmd: f64) -> Result<FrequencyResponse> {
        if !(f_cmd >= 0.0 && f_cmd.is_finite()) {
            return Err(domain("drive frequency must be finite and non-negative"));
        }
        let wn = self.omega_n()?;
        let zeta = self.zeta()?;
        let w = 2.0 * PI * f_cmd;
        let re = wn * wn - w * w;
        let im = 2.0 * zeta * wn * w;
        Ok(FrequencyResponse {
            gain: wn * wn / (re * re + im * im).sqrt(),
            phase_lag: im.atan2(re),
        })
    }

    /// Steady-state ratio of response to a constant command.
    pub fn dc_gain(&self) -> Result<f64> {
        Ok(self.frequency_response(0.0)?.gain)
    }
}

/// Undamped natural frequency `√(mB/I)/2π`, Hz.
pub fn natural_frequency(mb: f64, inertia: f64) -> Result<f64> {
    if !(mb > 0.0 && inertia > 0.0) {
        return Err(domain(alloc::format!(
            "natural frequency needs mB > 0 and I > 0 (got {mb}, {inertia})"
        )));
    }
    Ok((mb / inertia).sqrt() / (2.0 * PI))
}

/// `ζ = c / (2√(I·mB))`.
pub fn damping_ratio(c: f64, inertia: f64, mb: f64) -> Result<f64> {
    if !(mb > 0.0 && inertia > 0.0) {
        return Err(domain("damping ratio needs mB > 0 and I > 0"));
    }
    if c < 0.0 {
        return Err(domain("damping must be non-negative"));
    }
    Ok(c / (2.0 * (inertia * mb).sqrt()))
}

pub fn frequency_response(tracker: &SecondOrder, f_cmd: f64) -> Result<FrequencyResponse> {
    tracker.frequency_response(f_cmd)
}

/// Smallest field that overcomes the static threshold, `τ_s / m`, T.
pub fn min_actuation_field(tau_s: f64, m: f64) -> Result<f64> {
    if !(m > 0.0) {
        return Err(domain("net moment must be positive"));
    }
    Ok(tau_s / m)
}

/// No-slip travel `R·Δα`, m.
pub fn displacement_from_roll(radius: f64, delta_alpha: f64) -> Result<f64> {
    if !(radius > 0.0) {
        return Err(domain("rolling radius must be positive"));
    }
    Ok(radius * delta_alpha)
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CapsuleState {
    pub t: f64,
    pub psi: f64,
    pub psi_dot: f64,
    pub alpha: f64,
    pub alpha_dot: f64,
    /// m
    pub x: f64,
    pub y: f64,
    pub stuck_yaw: bool,
    pub stuck_roll: bool,
    pub slipping: bool,
}

impl CapsuleState {
    pub fn at(x: f64, y: f64, psi: f64) -> Self {
        Self {
            x,
            y,
            psi,
            ..Self::default()
        }
    }

    pub fn is_finite(&self) -> bool {
        [
            self.t,
            self.psi,
            self.psi_dot,
            self.alpha,
            self.alpha_dot,
            self.x,
            self.y,
        ]
        .iter()
        .all(|v| v.is_finite())
    }
}

/// Commanded field angles.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Command {
    pub phi: f64,
    pub gamma: f64,
}

/// Non-magnetic torques acting during a step, N·m.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ExternalTorques {
    /// Opposes roll.
    pub roll_load: f64,
    /// Adds to yaw.
    pub yaw_disturbance: f64,
}

struct Dof {
    stiffness: f64,
    damping: f64,
    inertia: f64,
    /// external torque added to the magnetic drive
    external: f64,
    threshold: f64,
}

/// Advance `(angle, rate)` for one DOF; returns the new values and whether it is held.
fn advance(
    dof: &Dof,
    law: TorqueLaw,
    eps: f64,
    cmd: f64,
    angle: f64,
    rate: f64,
    dt: f64,
) -> (f64, f64, bool) {
    let net = law.torque(dof.stiffness, cmd - angle) + dof.external;
    if rate.abs() < eps && net.abs() < dof.threshold {
        return (angle, 0.0, true);
    }
    let accel = |th: f64, w: f64| {
        (law.torque(dof.stiffness, cmd - th) + dof.external - dof.damping * w) / dof.inertia
    };
    let (k1a, k1w) = (rate, accel(angle, rate));
    let (k2a, k2w) = (
        rate + 0.5 * dt * k1w,
        accel(angle + 0.5 * dt * k1a, rate + 0.5 * dt * k1w),
    );
    let (k3a, k3w) = (
        rate + 0.5 * dt * k2w,
        accel(angle + 0.5 * dt * k2a, rate + 0.5 * dt * k2w),
    );
    let (k4a, k4w) = (rate + dt * k3w, accel(angle + dt * k3a, rate + dt * k3w));
    (
        angle + dt / 6.0 * (k1a + 2.0 * k2a + 2.0 * k3a + k4a),
        rate + dt / 6.0 * (k1w + 2.0 * k2w + 2.0 * k3w + k4w),
        false,
    )
}

/// One RK4 step of both DOFs under a command held constant over `dt`.
///
/// The `slipping` flag is an input decided by the contact model: while it is
/// set the capsule spins without advancing its position.
pub fn step(
    state: &CapsuleState,
    params: &DynamicsParams,
    command: Command,
    torques: ExternalTorques,
    dt: f64,
) -> Result<CapsuleState> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(domain("time step must be positive"));
    }
    let limit = params.stability_limit();
    if dt > limit {
        return Err(Error::Stability { dt, limit });
    }
    let yaw = Dof {
        stiffness: params.mb_yaw,
        damping: params.c_psi,
        inertia: params.i_psi,
        external: torques.yaw_disturbance,
        threshold: params.tau_s_yaw,
    };
    let roll = Dof {
        stiffness: params.mb_roll,
        damping: params.c_alpha,
        inertia: params.i_alpha,
        external: -torques.roll_load,
        threshold: params.tau_s_roll,
    };
    let law = params.torque_law;
    let eps = params.rate_epsilon;
    let (psi, psi_dot, stuck_yaw) =
        advance(&yaw, law, eps, command.phi, state.psi, state.psi_dot, dt);
    let (alpha, alpha_dot, stuck_roll) = advance(
        &roll,
        law,
        eps,
        command.gamma,
        state.alpha,
        state.alpha_dot,
        dt,
    );

    let (mut x, mut y) = (state.x, state.y);
    if !state.slipping {
        let ds = params.rolling_radius * (alpha - state.alpha);
        let heading = 0.5 * (psi + state.psi);
        x += ds * heading.cos();
        y += ds * heading.sin();
    }
    let next = CapsuleState {
        t: state.t + dt,
        psi,
        psi_dot,
        alpha,
        alpha_dot,
        x,
        y,
        stuck_yaw,
        stuck_roll,
        slipping: state.slipping,
    };
    if !next.is_finite() {
        return Err(Error::Integration { t: next.t });
    }
    Ok(next)
}

/// Which rotational DOF a measurement refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    Yaw,
    Roll,
}

/// Drive one DOF with `amplitude·sin(2πf t)`, let the transient settle for
/// `settle` seconds, then lock in over `periods` whole periods to extract the
/// simulated gain and phase lag.
pub fn measure_tracking(
    params: &DynamicsParams,
    axis: Axis,
    f_cmd: f64,
    amplitude: f64,
    settle: f64,
    periods: usize,
    dt: f64,
) -> Result<FrequencyResponse> {
    params.validate()?;
    if !(f_cmd > 0.0 && amplitude > 0.0 && periods > 0) {
        return Err(domain(
            "tracking measurement needs f > 0, amplitude > 0, periods > 0",
        ));
    }
    let w = 2.0 * PI * f_cmd;
    let period = 1.0 / f_cmd;
    let steps_per_period = (period / dt).round() as usize;
    let h = period / steps_per_period as f64;
    let settle_steps = (settle / h).ceil() as usize;
    let mut state = CapsuleState::default();
    let (mut in_phase, mut quadrature) = (0.0, 0.0);
    let total = settle_steps + periods * steps_per_period;
    for k in 0..total {
        let t = k as f64 * h;
        if k >= settle_steps {
            // rectangle rule over whole periods
            let theta = match axis {
                Axis::Yaw => state.psi,
                Axis::Roll => state.alpha,
            };
            in_phase += theta * (w * t).sin();
            quadrature += theta * (w * t).cos();
        }
        // command held at the step midpoint
        let c = amplitude * (w * (t + 0.5 * h)).sin();
        let command = match axis {
            Axis::Yaw => Command { phi: c, gamma: 0.0 },
            Axis::Roll => Command { phi: 0.0, gamma: c },
        };
        state = step(&state, params, command, ExternalTorques::default(), h)?;
    }
    let n = (periods * steps_per_period) as f64;
    let (a, b) = (2.0 * in_phase / n, 2.0 * quadrature / n);
    Ok(FrequencyResponse {
        gain: (a * a + b * b).sqrt() / amplitude,
        phase_lag: (-b).atan2(a),
    })
}
