//! Test surfaces: slope and protrusion load torques, friction and slip.

use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::FRAC_PI_2;
use core::str::FromStr;
#[allow(unused_imports)]
use num_traits::Float;

use serde::{Deserialize, Serialize};

use crate::dynamics::CapsuleState;
use crate::error::{invalid, Error, Result};
use crate::geometry::BodyProperties;
use crate::GRAVITY;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SurfaceKind {
    SmoothRigid,
    Incline,
    ProtrusionField,
}

/// A straight fold crossing the surface.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Protrusion {
    /// A point on the crest line, m.
    pub position: [f64; 2],
    /// Direction of the crest line from +x, rad.
    pub crest_angle: f64,
    /// mm
    pub height: f64,
    /// Engagement width across the crest, mm.
    pub width: f64,
}

impl Protrusion {
    /// Unit normal to the crest line.
    fn normal(&self) -> (f64, f64) {
        (-self.crest_angle.sin(), self.crest_angle.cos())
    }

    /// Signed distance of a point from the crest line, m.
    pub fn signed_distance(&self, x: f64, y: f64) -> f64 {
        let (nx, ny) = self.normal();
        (x - self.position[0]) * nx + (y - self.position[1]) * ny
    }
}

/// Zero-mean Ornstein-Uhlenbeck yaw disturbance torque from surface texture;
/// off for rigid smooth surfaces.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Texture {
    /// Stationary standard deviation, N·m.
    pub sigma: f64,
    /// s
    pub correlation_time: f64,
}

impl Texture {
    pub const NONE: Texture = Texture {
        sigma: 0.0,
        correlation_time: 0.2,
    };
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Surface {
    pub kind: SurfaceKind,
    /// degrees
    pub incline_angle: f64,
    /// Heading that points straight uphill, rad.
    pub uphill_heading: f64,
    pub protrusions: Vec<Protrusion>,
    pub mu_static: f64,
    pub mu_wet_factor: f64,
    pub wet: bool,
    /// Full side lengths of the surface centered at the origin, m.
    pub extent: [f64; 2],
    /// Viscous rolling resistance c_f, N·m·s/rad.
    pub rolling_damping: f64,
    /// Contact lever arm for yaw static friction, m.
    pub yaw_lever: f64,
    pub texture: Texture,
}

/// Default contact lever for yaw static friction, m.
pub const DEFAULT_YAW_LEVER: f64 = 1.0e-3;

impl Surface {
    pub fn flat(mu_static: f64, extent: [f64; 2]) -> Self {
        Self {
            kind: SurfaceKind::SmoothRigid,
            incline_angle: 0.0,
            uphill_heading: FRAC_PI_2,
            protrusions: Vec::new(),
            mu_static,
            mu_wet_factor: 1.0,
            wet: false,
            extent,
            rolling_damping: 0.0,
            yaw_lever: DEFAULT_YAW_LEVER,
            texture: Texture::NONE,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=45.0).contains(&self.incline_angle) {
            return Err(invalid(
                "Surface",
                format!("incline {}° outside [0°, 45°]", self.incline_angle),
            ));
        }
        if !(self.mu_static > 0.0 && self.mu_static.is_finite()) {
            return Err(invalid("Surface", "mu_static must be positive"));
        }
        if !(self.mu_wet_factor > 0.0 && self.mu_wet_factor <= 1.0) {
            return Err(invalid("Surface", "mu_wet_factor must lie in (0, 1]"));
        }
        if !(self.extent[0] > 0.0 && self.extent[1] > 0.0) {
            return Err(invalid("Surface", "extent must be positive"));
        }
        if self
            .protrusions
            .iter()
            .any(|p| !(p.height > 0.0 && p.width > 0.0))
        {
            return Err(invalid(
                "Surface",
                "protrusion heights and widths must be positive",
            ));
        }
        if !(self.rolling_damping >= 0.0 && self.yaw_lever >= 0.0) {
            return Err(invalid(
                "Surface",
                "damping and yaw lever must be non-negative",
            ));
        }
        if !(self.texture.sigma >= 0.0 && self.texture.correlation_time > 0.0) {
            return Err(invalid(
                "Surface",
                "texture needs sigma >= 0 and a positive correlation time",
            ));
        }
        Ok(())
    }

    pub fn mu_effective(&self) -> f64 {
        if self.wet {
            self.mu_static * self.mu_wet_factor
        } else {
            self.mu_static
        }
    }

    /// Slope angle seen by a capsule heading along `psi`, rad (positive uphill).
    pub fn slope_along(&self, psi: f64) -> f64 {
        let tan = self.incline_angle.to_radians().tan() * (psi - self.uphill_heading).cos();
        tan.atan()
    }

    /// Normal load on the incline, N.
    pub fn normal_load(&self, body: &BodyProperties) -> f64 {
        body.weight() * self.incline_angle.to_radians().cos()
    }

    /// Roll onset threshold τ_s ≈ μ·N·R.
    pub fn roll_threshold(&self, body: &BodyProperties) -> f64 {
        self.mu_effective() * self.normal_load(body) * body.rolling_radius
    }

    /// Yaw onset threshold μ·N·lever.
    pub fn yaw_threshold(&self, body: &BodyProperties) -> f64 {
        self.mu_effective() * self.normal_load(body) * self.yaw_lever
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        x.abs() <= 0.5 * self.extent[0] && y.abs() <= 0.5 * self.extent[1]
    }
}

/// Named surface presets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    SmoothPla,
    SiliconeSlope,
    SiliconeDryProtrusions,
    SiliconeWetProtrusions,
}

impl Preset {
    pub const ALL: [Preset; 4] = [
        Preset::SmoothPla,
        Preset::SiliconeSlope,
        Preset::SiliconeDryProtrusions,
        Preset::SiliconeWetProtrusions,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Preset::SmoothPla => "smooth_pla",
            Preset::SiliconeSlope => "silicone_slope",
            Preset::SiliconeDryProtrusions => "silicone_dry_protrusions",
            Preset::SiliconeWetProtrusions => "silicone_wet_protrusions",
        }
    }

    pub fn surface(self) -> Surface {
        let base = [75.0e-3, 75.0e-3];
        match self {
            Preset::SmoothPla => Surface::flat(0.30, [150.0e-3, 150.0e-3]),
            Preset::SiliconeSlope => Surface {
                kind: SurfaceKind::Incline,
                incline_angle: 7.5,
                texture: Texture {
                    sigma: 5.0e-5,
                    correlation_time: 2.0,
                },
                ..Surface::flat(0.9, base)
            },
            Preset::SiliconeDryProtrusions => Surface {
                kind: SurfaceKind::ProtrusionField,
                protrusions: gastric_folds(),
                texture: Texture {
                    sigma: 1.2e-4,
                    correlation_time: 2.0,
                },
                ..Surface::flat(0.9, base)
            },
            Preset::SiliconeWetProtrusions => Surface {
                kind: SurfaceKind::ProtrusionField,
                protrusions: gastric_folds(),
                mu_wet_factor: 0.4,
                wet: true,
                texture: Texture {
                    sigma: 2.5e-4,
                    correlation_time: 2.0,
                },
                ..Surface::flat(0.9, base)
            },
        }
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Preset::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| invalid("Preset", format!("unknown surface preset '{s}'")))
    }
}

/// Three 2 mm oblique folds across the middle, 5 mm ridges along both edges.
pub fn gastric_folds() -> Vec<Protrusion> {
    let fold = |y_mm: f64, crest_deg: f64| Protrusion {
        position: [0.0, y_mm * 1e-3],
        crest_angle: crest_deg.to_radians(),
        height: 2.0,
        width: 4.0,
    };
    let edge = |x_mm: f64| Protrusion {
        position: [x_mm * 1e-3, 0.0],
        crest_angle: FRAC_PI_2,
        height: 5.0,
        width: 4.0,
    };
    alloc::vec![
        fold(-15.0, 12.0),
        fold(0.0, -8.0),
        fold(15.0, 15.0),
        edge(-30.0),
        edge(30.0)
    ]
}

/// Pivot-over-edge torque m_c·g·√(2Rh − h²) for a cylinder of radius `radius`.
pub fn protrusion_barrier(radius: f64, height: f64, mass: f64) -> Result<f64> {
    if !(height > 0.0 && radius > 0.0 && mass > 0.0) {
        return Err(crate::error::domain(
            "barrier needs positive radius, height and mass",
        ));
    }
    if height >= 2.0 * radius {
        return Err(Error::Untraversable { height, radius });
    }
    Ok(mass * GRAVITY * (2.0 * radius * height - height * height).sqrt())
}

/// Tangential contact force that must be transmitted to roll against `tau_load`, N.
pub fn traction_required(tau_load: f64, radius: f64) -> f64 {
    tau_load.abs() / radius
}

/// True when the contact cannot supply the traction.
pub fn slip_check(traction_required: f64, mu_effective: f64, normal_load: f64) -> bool {
    traction_required > mu_effective * normal_load
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContactReport {
    /// Opposes positive roll, N·m.
    pub tau_load: f64,
    /// Yaw torque from oblique fold contact, N·m.
    pub yaw_torque: f64,
    pub mu_effective: f64,
    /// N
    pub normal_load: f64,
    /// rad
    pub slope: f64,
    pub on_protrusion: Option<usize>,
    pub slip: bool,
}

/// Load torque, friction and fold contact for the current state.
///
/// `slip` is left false; the simulation loop settles it with [`slip_check`].
pub fn load_torque(
    surface: &Surface,
    state: &CapsuleState,
    body: &BodyProperties,
) -> Result<ContactReport> {
    if !surface.contains(state.x, state.y) {
        return Err(Error::OutOfBounds {
            x: state.x,
            y: state.y,
        });
    }
    let slope = surface.slope_along(state.psi);
    let r = body.rolling_radius;
    let mut tau = body.mass * GRAVITY * r * slope.sin() + surface.rolling_damping * state.alpha_dot;
    let mut yaw = 0.0;
    let mut on = None;
    let (hx, hy) = (state.psi.cos(), state.psi.sin());
    for (i, p) in surface.protrusions.iter().enumerate() {
        let half = 0.5 * p.width * 1e-3;
        let s = p.signed_distance(state.x, state.y);
        if s.abs() > half {
            continue;
        }
        on.get_or_insert(i);
        let barrier = protrusion_barrier(r, p.height * 1e-3, body.mass)?;
        let (nx, ny) = p.normal();
        let q = -s / half;
        tau += (hx * nx + hy * ny) * barrier * q;
        // one capsule end meets an oblique crest first and swings the axis onto it
        let beta = (state.psi - FRAC_PI_2) - p.crest_angle;
        yaw -= barrier * q.abs() / r * (0.25 * body.contact_length) * (2.0 * beta).sin();
    }
    Ok(ContactReport {
        tau_load: tau,
        yaw_torque: yaw,
        mu_effective: surface.mu_effective(),
        normal_load: surface.normal_load(body),
        slope,
        on_protrusion: on,
        slip: false,
    })
}
