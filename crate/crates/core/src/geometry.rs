//! Bar and capsule-coat geometry, programmed pole patterns, and their
//! discretization into magnetized dipole cells.
//!
//! Body frames follow the test-bed convention: `z` is vertical (yaw axis),
//! `x` lateral and `y` transverse. A bar lies with its length along `x`; the
//! capsule coat is a cylindrical shell whose long (rolling) axis is `y`.
//! Geometric inputs are in millimeters, everything produced for the field
//! solver is SI.

use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::PI;
#[allow(unused_imports)]
use num_traits::Float;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::field::{BodyRegion, Cell, MagnetizedBody};
use crate::{Vec3, GRAVITY};

const MM: f64 = 1.0e-3;

/// Capsule cavity volume used when nothing else is specified, mm³.
pub const DEFAULT_CAVITY_VOLUME_MM3: f64 = 1007.93;
/// Default composite remanent magnetization, A/m.
pub const DEFAULT_REMANENCE: f64 = 100.0e3;
/// Default silicone/NdFeB composite density, kg/m³.
pub const DEFAULT_DENSITY: f64 = 2300.0;
/// Default discretization cell size, mm.
pub const DEFAULT_CELL_SIZE_MM: f64 = 0.5;
/// Yaw inertia estimate of the coated capsule, kg·m².
pub const DEFAULT_INERTIA_YAW: f64 = 3.74e-7;
/// Roll inertia estimate of the coated capsule, kg·m².
pub const DEFAULT_INERTIA_ROLL: f64 = 2.06e-7;

/// Rectangular magnetic bar. Length along body `x`, width along `y`, height along `z`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BarGeometry {
    pub length_l: f64,
    pub width_d: f64,
    pub height_h: f64,
}

impl BarGeometry {
    pub fn new(length_l: f64, width_d: f64, height_h: f64) -> Result<Self> {
        let bar = Self {
            length_l,
            width_d,
            height_h,
        };
        bar.validate()?;
        Ok(bar)
    }

    /// The 20 × 5 × 2 mm test bar.
    pub fn reference() -> Self {
        Self {
            length_l: 20.0,
            width_d: 5.0,
            height_h: 2.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let dims = [self.length_l, self.width_d, self.height_h];
        if dims.iter().any(|v| !v.is_finite() || *v <= 0.0) {
            return Err(invalid("BarGeometry", "all dimensions must be positive"));
        }
        if self.length_l <= self.width_d {
            return Err(invalid("BarGeometry", "length must exceed width"));
        }
        Ok(())
    }

    pub fn volume_mm3(&self) -> f64 {
        self.length_l * self.width_d * self.height_h
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CapStyle {
    OpenCylinder,
    HemisphericalCaps,
}

/// Cylindrical magnetic coat around the capsule body; the long axis is body `y`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoatGeometry {
    pub outer_radius: f64,
    pub inner_radius: f64,
    pub length: f64,
    pub cap_style: CapStyle,
}

impl CoatGeometry {
    pub fn new(
        outer_radius: f64,
        inner_radius: f64,
        length: f64,
        cap_style: CapStyle,
    ) -> Result<Self> {
        let coat = Self {
            outer_radius,
            inner_radius,
            length,
            cap_style,
        };
        coat.validate()?;
        Ok(coat)
    }

    /// R = 7.5 mm, r = 5 mm, D = 19 mm open cylindrical coat.
    pub fn reference() -> Self {
        Self {
            outer_radius: 7.5,
            inner_radius: 5.0,
            length: 19.0,
            cap_style: CapStyle::OpenCylinder,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let vals = [self.outer_radius, self.inner_radius, self.length];
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(invalid("CoatGeometry", "dimensions must be finite"));
        }
        if !(self.outer_radius > self.inner_radius && self.inner_radius > 0.0) {
            return Err(invalid(
                "CoatGeometry",
                "need outer_radius > inner_radius > 0",
            ));
        }
        if self.length <= 0.0 {
            return Err(invalid("CoatGeometry", "length must be positive"));
        }
        Ok(())
    }

    pub fn thickness(&self) -> f64 {
        self.outer_radius - self.inner_radius
    }
}

/// Shell volume of the coat in mm³.
///
/// An open cylinder gives π(R² − r²)·D; hemispherical caps add a spherical
/// shell (4/3)π(R³ − r³) split over the two ends.
pub fn shell_volume(coat: &CoatGeometry) -> f64 {
    let (r_out, r_in) = (coat.outer_radius, coat.inner_radius);
    let cylinder = PI * (r_out * r_out - r_in * r_in) * coat.length;
    match coat.cap_style {
        CapStyle::OpenCylinder => cylinder,
        CapStyle::HemisphericalCaps => cylinder + 4.0 / 3.0 * PI * (r_out.powi(3) - r_in.powi(3)),
    }
}

/// Fraction of the total (coat + cavity) volume occupied by the coat.
pub fn volume_fraction(coat_volume: f64, cavity_volume: f64) -> Result<f64> {
    if !(coat_volume > 0.0 && cavity_volume > 0.0) {
        return Err(crate::error::domain(format!(
            "volumes must be positive (coat {coat_volume}, cavity {cavity_volume})"
        )));
    }
    Ok(coat_volume / (coat_volume + cavity_volume))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Polarity {
    N,
    S,
}

impl Polarity {
    pub fn sign(self) -> f64 {
        match self {
            Polarity::N => 1.0,
            Polarity::S => -1.0,
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Polarity::N => Polarity::S,
            Polarity::S => Polarity::N,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub fraction_of_length: f64,
    pub polarity: Polarity,
}

/// How a segment's polarity maps onto a moment direction.
///
/// `Axis`: N segments carry `+axis`, S segments `-axis`.
/// `Radial`: N segments point along the outward surface normal (north face
/// outward), S segments inward. Only meaningful for the coat.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MagnetizationDirection {
    Axis([f64; 3]),
    Radial,
}

/// Ordered pole segments with a common magnetization rule and remanence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolePattern {
    pub segments: Vec<Segment>,
    pub direction: MagnetizationDirection,
    /// Remanent magnetization M₀, A/m.
    pub remanence: f64,
}

impl PolePattern {
    pub fn new(
        segments: Vec<Segment>,
        direction: MagnetizationDirection,
        remanence: f64,
    ) -> Result<Self> {
        let pattern = Self {
            segments,
            direction,
            remanence,
        };
        pattern.validate()?;
        Ok(pattern)
    }

    /// Equal-length segments from a polarity string such as `"SNNS"`.
    pub fn from_code(
        code: &str,
        direction: MagnetizationDirection,
        remanence: f64,
    ) -> Result<Self> {
        let n = code.chars().count();
        if n == 0 {
            return Err(invalid("PolePattern", "empty pole code"));
        }
        let segments = code
            .chars()
            .map(|c| match c.to_ascii_uppercase() {
                'N' => Ok(Polarity::N),
                'S' => Ok(Polarity::S),
                other => Err(invalid("PolePattern", format!("unknown pole '{other}'"))),
            })
            .map(|p| {
                p.map(|polarity| Segment {
                    fraction_of_length: 1.0 / n as f64,
                    polarity,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(segments, direction, remanence)
    }

    /// Single uniformly magnetized segment.
    pub fn uniform(
        polarity: Polarity,
        direction: MagnetizationDirection,
        remanence: f64,
    ) -> Result<Self> {
        let pattern = Self {
            segments: alloc::vec![Segment {
                fraction_of_length: 1.0,
                polarity
            }],
            direction,
            remanence,
        };
        pattern.validate_common()?;
        Ok(pattern)
    }

    /// Fractions, finiteness and sign checks; accepts M₀ = 0 and single segments.
    pub fn validate_common(&self) -> Result<()> {
        let sum: f64 = self.segments.iter().map(|s| s.fraction_of_length).sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(invalid(
                "PolePattern",
                format!("fractions sum to {sum}, expected 1"),
            ));
        }
        if self
            .segments
            .iter()
            .any(|s| !(s.fraction_of_length > 0.0 && s.fraction_of_length <= 1.0))
        {
            return Err(invalid(
                "PolePattern",
                "segment fractions must lie in (0, 1]",
            ));
        }
        if !(self.remanence >= 0.0 && self.remanence.is_finite()) {
            return Err(invalid(
                "PolePattern",
                "remanence must be finite and non-negative",
            ));
        }
        if let MagnetizationDirection::Axis(a) = self.direction {
            let n = Vec3::from(a).norm();
            if (n - 1.0).abs() > 1e-9 {
                return Err(invalid(
                    "PolePattern",
                    "magnetization axis must be a unit vector",
                ));
            }
        }
        Ok(())
    }

    /// Full invariant check: at least two segments and M₀ > 0.
    ///
    /// Zero-remanence patterns are tolerated only through [`PolePattern::demagnetized`].
    pub fn validate(&self) -> Result<()> {
        self.validate_common()?;
        if self.segments.len() < 2 {
            return Err(invalid("PolePattern", "at least two segments required"));
        }
        if self.remanence <= 0.0 {
            return Err(invalid("PolePattern", "remanence must be positive"));
        }
        Ok(())
    }

    /// Same layout at another M₀; the value is checked later by [`PolePattern::validate_common`].
    pub fn with_remanence(&self, remanence: f64) -> Self {
        Self {
            remanence,
            ..self.clone()
        }
    }

    /// Same layout with M₀ = 0, used for null field studies.
    pub fn demagnetized(&self) -> Self {
        self.with_remanence(0.0)
    }

    /// Every polarity reversed.
    pub fn flipped(&self) -> Self {
        Self {
            segments: self
                .segments
                .iter()
                .map(|s| Segment {
                    polarity: s.polarity.flipped(),
                    ..*s
                })
                .collect(),
            ..self.clone()
        }
    }

    /// Polarity of the segment containing the normalized coordinate `u ∈ [0, 1]`.
    pub fn segment_at(&self, u: f64) -> usize {
        let mut acc = 0.0;
        for (i, s) in self.segments.iter().enumerate() {
            acc += s.fraction_of_length;
            if u < acc {
                return i;
            }
        }
        self.segments.len() - 1
    }

    /// SNNS bar pattern magnetized along ±ŷ.
    pub fn snns_bar(remanence: f64) -> Self {
        Self::from_code("SNNS", MagnetizationDirection::Axis([0.0, 1.0, 0.0]), 1.0)
            .expect("static pattern")
            .with_remanence(remanence)
    }

    /// Upper half-shell NSSN pattern of the capsule coat, radial magnetization.
    pub fn nssn_upper(remanence: f64) -> Self {
        Self::from_code("NSSN", MagnetizationDirection::Radial, 1.0)
            .expect("static pattern")
            .with_remanence(remanence)
    }

    /// Lower half-shell SNNS pattern of the capsule coat, radial magnetization.
    pub fn snns_lower(remanence: f64) -> Self {
        Self::from_code("SNNS", MagnetizationDirection::Radial, 1.0)
            .expect("static pattern")
            .with_remanence(remanence)
    }
}

/// A geometry with its pattern(s), ready to be discretized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BodySpec {
    Bar {
        geometry: BarGeometry,
        pattern: PolePattern,
    },
    Coat {
        geometry: CoatGeometry,
        upper: PolePattern,
        lower: PolePattern,
    },
}

impl BodySpec {
    /// SNNS bar with the reference dimensions.
    pub fn reference_bar(remanence: f64) -> Self {
        BodySpec::Bar {
            geometry: BarGeometry::reference(),
            pattern: PolePattern::snns_bar(remanence),
        }
    }

    /// NSSN (upper) / SNNS (lower) coat with the reference dimensions.
    pub fn reference_coat(remanence: f64) -> Self {
        BodySpec::Coat {
            geometry: CoatGeometry::reference(),
            upper: PolePattern::nssn_upper(remanence),
            lower: PolePattern::snns_lower(remanence),
        }
    }

    /// Analytic magnetized volume, m³.
    pub fn analytic_volume(&self) -> f64 {
        match self {
            BodySpec::Bar { geometry, .. } => geometry.volume_mm3() * MM * MM * MM,
            BodySpec::Coat { geometry, .. } => shell_volume(geometry) * MM * MM * MM,
        }
    }
}

/// Discretize a body description into dipole cells of roughly `cell_size` mm.
pub fn realize_pattern(spec: &BodySpec, cell_size: f64) -> Result<MagnetizedBody> {
    match spec {
        BodySpec::Bar { geometry, pattern } => realize_bar(geometry, pattern, cell_size),
        BodySpec::Coat {
            geometry,
            upper,
            lower,
        } => realize_coat(geometry, upper, lower, cell_size),
    }
}

fn cells_along(extent: f64, cell_size: f64) -> usize {
    // tolerance keeps exact multiples (20 / 0.5) from rounding up
    let n = (extent / cell_size - 1e-9).ceil();
    if n < 1.0 {
        1
    } else {
        n as usize
    }
}

fn check_cell_size(cell_size: f64, smallest_feature: f64) -> Result<()> {
    if !(cell_size > 0.0 && cell_size.is_finite()) {
        return Err(Error::Discretization(format!(
            "cell size {cell_size} mm must be positive"
        )));
    }
    if cell_size > smallest_feature + 1e-12 {
        return Err(Error::Discretization(format!(
            "cell size {cell_size} mm exceeds smallest feature {smallest_feature} mm"
        )));
    }
    Ok(())
}

fn require_every_segment(counts: &[usize], label: &str) -> Result<()> {
    if let Some(i) = counts.iter().position(|&c| c == 0) {
        return Err(Error::Discretization(format!(
            "{label} segment {i} received no cells; reduce the cell size"
        )));
    }
    Ok(())
}

/// Bar discretized on a regular lattice; segments run along the bar length.
pub fn realize_bar(
    bar: &BarGeometry,
    pattern: &PolePattern,
    cell_size: f64,
) -> Result<MagnetizedBody> {
    bar.validate()?;
    pattern.validate_common()?;
    let axis = match pattern.direction {
        MagnetizationDirection::Axis(a) => Vec3::from(a),
        MagnetizationDirection::Radial => {
            return Err(invalid(
                "PolePattern",
                "radial magnetization is only defined for the coat",
            ))
        }
    };
    check_cell_size(cell_size, bar.height_h.min(bar.width_d))?;

    let (nx, ny, nz) = (
        cells_along(bar.length_l, cell_size),
        cells_along(bar.width_d, cell_size),
        cells_along(bar.height_h, cell_size),
    );
    let (dx, dy, dz) = (
        bar.length_l / nx as f64,
        bar.width_d / ny as f64,
        bar.height_h / nz as f64,
    );
    let volume = dx * dy * dz * MM * MM * MM;
    let mut counts = alloc::vec![0usize; pattern.segments.len()];
    let mut cells = Vec::with_capacity(nx * ny * nz);
    for i in 0..nx {
        let x = (i as f64 + 0.5) * dx - bar.length_l / 2.0;
        let seg = pattern.segment_at((x + bar.length_l / 2.0) / bar.length_l);
        counts[seg] += 1;
        let moment = axis * (pattern.segments[seg].polarity.sign() * pattern.remanence * volume);
        for j in 0..ny {
            let y = (j as f64 + 0.5) * dy - bar.width_d / 2.0;
            for k in 0..nz {
                let z = (k as f64 + 0.5) * dz - bar.height_h / 2.0;
                cells.push(Cell {
                    center: Vec3::new(x, y, z) * MM,
                    moment,
                    volume,
                });
            }
        }
    }
    require_every_segment(&counts, "bar")?;
    let region = BodyRegion::Box {
        half_extents: Vec3::new(bar.length_l, bar.width_d, bar.height_h) * (0.5 * MM),
    };
    MagnetizedBody::new(cells, region, cell_size * MM)
}

/// Coat discretized on a cylindrical (and, with caps, spherical) lattice.
///
/// The upper half-shell covers azimuths θ ∈ (0, π) measured from +x towards +z,
/// the lower half θ ∈ (π, 2π); each pattern's segments are laid out along its
/// half-shell arc in increasing θ.
pub fn realize_coat(
    coat: &CoatGeometry,
    upper: &PolePattern,
    lower: &PolePattern,
    cell_size: f64,
) -> Result<MagnetizedBody> {
    coat.validate()?;
    upper.validate_common()?;
    lower.validate_common()?;
    check_cell_size(cell_size, coat.thickness().min(coat.length))?;

    let (r_in, r_out) = (coat.inner_radius, coat.outer_radius);
    let nr = cells_along(coat.thickness(), cell_size);
    let dr = coat.thickness() / nr as f64;
    let r_mid = 0.5 * (r_in + r_out);
    // multiple of 8 keeps quarter and eighth arc boundaries on cell edges
    let n_half = {
        let n = cells_along(PI * r_mid, cell_size);
        n.div_ceil(8) * 8
    };
    let dtheta = PI / n_half as f64;
    let ny = cells_along(coat.length, cell_size);
    let dy = coat.length / ny as f64;

    let mut counts_upper = alloc::vec![0usize; upper.segments.len()];
    let mut counts_lower = alloc::vec![0usize; lower.segments.len()];
    let mut cells = Vec::new();

    // arc pattern lookup shared by barrel and caps
    let assign = |theta: f64, counts_u: &mut [usize], counts_l: &mut [usize]| {
        if theta < PI {
            let seg = upper.segment_at(theta / PI);
            counts_u[seg] += 1;
            (upper, seg)
        } else {
            let seg = lower.segment_at((theta - PI) / PI);
            counts_l[seg] += 1;
            (lower, seg)
        }
    };

    for it in 0..2 * n_half {
        let theta = (it as f64 + 0.5) * dtheta;
        let (c, s) = (theta.cos(), theta.sin());
        let radial = Vec3::new(c, 0.0, s);
        for ir in 0..nr {
            let rho = r_in + (ir as f64 + 0.5) * dr;
            let volume = rho * dr * dtheta * dy * MM * MM * MM;
            for iy in 0..ny {
                let y = (iy as f64 + 0.5) * dy - coat.length / 2.0;
                let (pattern, seg) = assign(theta, &mut counts_upper, &mut counts_lower);
                let moment = segment_moment(pattern, seg, radial, volume);
                cells.push(Cell {
                    center: Vec3::new(rho * c, y, rho * s) * MM,
                    moment,
                    volume,
                });
            }
        }
    }

    if coat.cap_style == CapStyle::HemisphericalCaps {
        let n_polar = cells_along(0.5 * PI * r_mid, cell_size);
        let dpolar = 0.5 * PI / n_polar as f64;
        for end in [-1.0f64, 1.0] {
            let cap_center = Vec3::new(0.0, end * coat.length / 2.0, 0.0);
            for ip in 0..n_polar {
                let polar = (ip as f64 + 0.5) * dpolar;
                let (sp, cp) = (polar.sin(), polar.cos());
                for it in 0..2 * n_half {
                    let theta = (it as f64 + 0.5) * dtheta;
                    let normal = Vec3::new(sp * theta.cos(), end * cp, sp * theta.sin());
                    for ir in 0..nr {
                        let rho = r_in + (ir as f64 + 0.5) * dr;
                        let volume = rho * rho * sp * dr * dpolar * dtheta * MM * MM * MM;
                        let (pattern, seg) = assign(theta, &mut counts_upper, &mut counts_lower);
                        let moment = segment_moment(pattern, seg, normal, volume);
                        cells.push(Cell {
                            center: cap_center * MM + normal * (rho * MM),
                            moment,
                            volume,
                        });
                    }
                }
            }
        }
    }

    require_every_segment(&counts_upper, "upper")?;
    require_every_segment(&counts_lower, "lower")?;
    let region = BodyRegion::Shell {
        inner_radius: r_in * MM,
        outer_radius: r_out * MM,
        half_length: 0.5 * coat.length * MM,
        caps: coat.cap_style == CapStyle::HemisphericalCaps,
    };
    MagnetizedBody::new(cells, region, cell_size * MM)
}

fn segment_moment(pattern: &PolePattern, seg: usize, normal: Vec3, volume: f64) -> Vec3 {
    let dir = match pattern.direction {
        MagnetizationDirection::Axis(a) => Vec3::from(a),
        MagnetizationDirection::Radial => normal,
    };
    dir * (pattern.segments[seg].polarity.sign() * pattern.remanence * volume)
}

/// Composite material used to derive mass and magnetization defaults.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Material {
    /// kg/m³
    pub density: f64,
    /// Remanent magnetization M₀, A/m.
    pub remanence: f64,
}

impl Default for Material {
    fn default() -> Self {
        Self {
            density: DEFAULT_DENSITY,
            remanence: DEFAULT_REMANENCE,
        }
    }
}

/// Rigid-body properties of the capsule used by dynamics and contact models.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BodyProperties {
    /// kg
    pub mass: f64,
    /// kg·m²
    pub inertia_yaw: f64,
    /// kg·m²
    pub inertia_roll: f64,
    /// m
    pub rolling_radius: f64,
    /// Length of the line contact with the substrate, m.
    pub contact_length: f64,
}

impl BodyProperties {
    pub fn new(
        mass: f64,
        inertia_yaw: f64,
        inertia_roll: f64,
        rolling_radius: f64,
        contact_length: f64,
    ) -> Result<Self> {
        let props = Self {
            mass,
            inertia_yaw,
            inertia_roll,
            rolling_radius,
            contact_length,
        };
        props.validate()?;
        Ok(props)
    }

    pub fn validate(&self) -> Result<()> {
        let vals = [
            self.mass,
            self.inertia_yaw,
            self.inertia_roll,
            self.rolling_radius,
            self.contact_length,
        ];
        if vals.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(invalid("BodyProperties", "all properties must be positive"));
        }
        Ok(())
    }

    /// Coat mass from density (plus an optional payload), reference inertias,
    /// rolling radius = outer coat radius.
    pub fn for_coat(coat: &CoatGeometry, material: &Material, payload_mass: f64) -> Result<Self> {
        coat.validate()?;
        let mass = material.density * shell_volume(coat) * MM * MM * MM + payload_mass;
        Self::new(
            mass,
            DEFAULT_INERTIA_YAW,
            DEFAULT_INERTIA_ROLL,
            coat.outer_radius * MM,
            coat.length * MM,
        )
    }

    /// Normal load N = m·g on a level surface, newtons.
    pub fn weight(&self) -> f64 {
        self.mass * GRAVITY
    }
}
