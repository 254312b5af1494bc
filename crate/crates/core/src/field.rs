//! Dipole-cell superposition field solver and the external actuator magnet.

use alloc::format;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use nalgebra::{Isometry3, Point3};
use serde::{Deserialize, Serialize};

use crate::error::{domain, invalid, Error, Result};
use crate::{Vec3, MU0_OVER_4PI};

/// One magnetized volume element, body frame, SI units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub center: Vec3,
    pub moment: Vec3,
    /// m³
    pub volume: f64,
}

/// Region occupied by the magnetized material, body frame. Used only to
/// flag interior evaluations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BodyRegion {
    Box {
        half_extents: Vec3,
    },
    Shell {
        inner_radius: f64,
        outer_radius: f64,
        half_length: f64,
        caps: bool,
    },
    Unbounded,
}

impl BodyRegion {
    pub fn contains(&self, p: &Vec3) -> bool {
        match *self {
            BodyRegion::Box { half_extents } => {
                p.x.abs() <= half_extents.x
                    && p.y.abs() <= half_extents.y
                    && p.z.abs() <= half_extents.z
            }
            BodyRegion::Shell {
                inner_radius,
                outer_radius,
                half_length,
                caps,
            } => {
                if p.y.abs() <= half_length {
                    let rho = (p.x * p.x + p.z * p.z).sqrt();
                    rho >= inner_radius && rho <= outer_radius
                } else if caps {
                    let c = Vec3::new(0.0, half_length * p.y.signum(), 0.0);
                    let d = (p - c).norm();
                    d >= inner_radius && d <= outer_radius
                } else {
                    false
                }
            }
            BodyRegion::Unbounded => false,
        }
    }

    /// Largest distance from the body origin to any point of the region.
    pub fn radius(&self) -> f64 {
        match *self {
            BodyRegion::Box { half_extents } => half_extents.norm(),
            BodyRegion::Shell {
                outer_radius,
                half_length,
                caps,
                ..
            } => {
                if caps {
                    half_length + outer_radius
                } else {
                    (half_length * half_length + outer_radius * outer_radius).sqrt()
                }
            }
            BodyRegion::Unbounded => f64::INFINITY,
        }
    }
}

/// A rigid collection of dipole cells with a body-to-world pose.
#[derive(Debug, Clone, PartialEq)]
pub struct MagnetizedBody {
    cells: Vec<Cell>,
    pose: Isometry3<f64>,
    region: BodyRegion,
    cell_size: f64,
}

/// Field value together with whether the point lies inside the magnetized material.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldSample {
    pub b: Vec3,
    pub interior: bool,
}

impl MagnetizedBody {
    /// `cell_size` in meters sets the singularity guard radius (cell_size / 10).
    pub fn new(cells: Vec<Cell>, region: BodyRegion, cell_size: f64) -> Result<Self> {
        if cells.is_empty() {
            return Err(invalid("MagnetizedBody", "at least one cell required"));
        }
        if cells.iter().any(|c| {
            !c.moment.iter().all(|v| v.is_finite()) || !c.center.iter().all(|v| v.is_finite())
        }) {
            return Err(invalid(
                "MagnetizedBody",
                "cell centers and moments must be finite",
            ));
        }
        if !(cell_size > 0.0 && cell_size.is_finite()) {
            return Err(invalid("MagnetizedBody", "cell size must be positive"));
        }
        Ok(Self {
            cells,
            pose: Isometry3::identity(),
            region,
            cell_size,
        })
    }

    /// A single point dipole at the body origin.
    pub fn point_dipole(moment: Vec3, guard_size: f64) -> Result<Self> {
        Self::new(
            alloc::vec![Cell {
                center: Vec3::zeros(),
                moment,
                volume: 0.0,
            }],
            BodyRegion::Unbounded,
            guard_size,
        )
    }

    pub fn with_pose(mut self, pose: Isometry3<f64>) -> Self {
        self.pose = pose;
        self
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn pose(&self) -> &Isometry3<f64> {
        &self.pose
    }

    pub fn region(&self) -> &BodyRegion {
        &self.region
    }

    pub fn cell_size(&self) -> f64 {
        self.cell_size
    }

    /// Total magnetized volume, m³.
    pub fn volume(&self) -> f64 {
        self.cells.iter().map(|c| c.volume).sum()
    }

    /// Is the world point inside the magnetized material?
    pub fn is_interior(&self, point: &Vec3) -> bool {
        let local = self.pose.inverse_transform_point(&Point3::from(*point));
        self.region.contains(&local.coords)
    }

    /// Field and interior flag at a world point.
    pub fn evaluate(&self, point: &Vec3) -> Result<FieldSample> {
        let local = self
            .pose
            .inverse_transform_point(&Point3::from(*point))
            .coords;
        let guard = self.cell_size / 10.0;
        let mut b = Vec3::zeros();
        for (i, cell) in self.cells.iter().enumerate() {
            let r = local - cell.center;
            let d = r.norm();
            if d <= guard {
                return Err(Error::Singular {
                    cell: i,
                    distance: d,
                });
            }
            b += dipole_kernel(&cell.moment, &r, d);
        }
        Ok(FieldSample {
            b: self.pose.rotation * b,
            interior: self.region.contains(&local),
        })
    }

    pub fn field_at(&self, point: &Vec3) -> Result<Vec3> {
        self.evaluate(point).map(|s| s.b)
    }

    /// Sum of cell moments, world frame.
    pub fn net_moment(&self) -> Vec3 {
        let sum = self
            .cells
            .iter()
            .fold(Vec3::zeros(), |acc, c| acc + c.moment);
        self.pose.rotation * sum
    }

    /// Cells of two bodies merged into one, expressed in `self`'s body frame.
    pub fn merged(&self, other: &MagnetizedBody) -> Result<Self> {
        let to_self = self.pose.inverse() * other.pose;
        let mut cells = self.cells.clone();
        cells.extend(other.cells.iter().map(|c| Cell {
            center: to_self.transform_point(&Point3::from(c.center)).coords,
            moment: to_self.rotation * c.moment,
            volume: c.volume,
        }));
        let mut merged = Self::new(
            cells,
            BodyRegion::Unbounded,
            self.cell_size.min(other.cell_size),
        )?;
        merged.pose = self.pose;
        Ok(merged)
    }
}

#[inline]
fn dipole_kernel(m: &Vec3, r: &Vec3, d: f64) -> Vec3 {
    let inv_d = 1.0 / d;
    let r_hat = r * inv_d;
    let inv_d3 = inv_d * inv_d * inv_d;
    (r_hat * (3.0 * m.dot(&r_hat)) - m) * (MU0_OVER_4PI * inv_d3)
}

/// Point-dipole field of moment `m` at offset `r` from the dipole.
pub fn dipole_field(m: &Vec3, r: &Vec3) -> Result<Vec3> {
    let d = r.norm();
    if !(d > 0.0) {
        return Err(domain("dipole field evaluated at the dipole position"));
    }
    Ok(dipole_kernel(m, r, d))
}

pub fn field_at(body: &MagnetizedBody, point: &Vec3) -> Result<Vec3> {
    body.field_at(point)
}

pub fn net_moment(body: &MagnetizedBody) -> Vec3 {
    body.net_moment()
}

/// τ = m × B.
pub fn torque_on(moment: &Vec3, b_ext: &Vec3) -> Vec3 {
    moment.cross(b_ext)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Plane {
    Xz,
    Yz,
    Xy,
}

impl Plane {
    /// World point for in-plane coordinates `(a, b)` and out-of-plane `offset`.
    pub fn point(self, a: f64, b: f64, offset: f64) -> Vec3 {
        match self {
            Plane::Xz => Vec3::new(a, offset, b),
            Plane::Yz => Vec3::new(offset, a, b),
            Plane::Xy => Vec3::new(a, b, offset),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Plane::Xz => "xz",
            Plane::Yz => "yz",
            Plane::Xy => "xy",
        }
    }
}

/// Square sampling lattice on a central (or offset) plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MapSpec {
    pub plane: Plane,
    /// m
    pub offset: f64,
    /// Side length of the square region, m.
    pub extent: f64,
    /// Points per side.
    pub resolution: usize,
}

impl MapSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.extent > 0.0 && self.extent.is_finite()) {
            return Err(invalid("FieldMap", "extent must be positive"));
        }
        if self.resolution == 0 {
            return Err(invalid("FieldMap", "resolution must be positive"));
        }
        if !self.offset.is_finite() {
            return Err(invalid("FieldMap", "offset must be finite"));
        }
        Ok(())
    }

    /// Uniform grid spacing, m (zero for a single-point lattice).
    pub fn spacing(&self) -> f64 {
        if self.resolution > 1 {
            self.extent / (self.resolution - 1) as f64
        } else {
            0.0
        }
    }

    /// In-plane coordinate of lattice index `i`.
    pub fn coordinate(&self, i: usize) -> f64 {
        if self.resolution == 1 {
            0.0
        } else {
            -0.5 * self.extent + i as f64 * self.spacing()
        }
    }

    /// Lattice points, row-major: index `row * resolution + col`, with `col`
    /// along the first in-plane axis and `row` along the second.
    pub fn points(&self) -> Result<Vec<Vec3>> {
        self.validate()?;
        let n = self.resolution;
        let mut pts = Vec::with_capacity(n * n);
        for row in 0..n {
            for col in 0..n {
                pts.push(
                    self.plane
                        .point(self.coordinate(col), self.coordinate(row), self.offset),
                );
            }
        }
        Ok(pts)
    }
}

/// Sampled field over a [`MapSpec`] lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldMap {
    pub spec: MapSpec,
    pub points: Vec<Vec3>,
    pub values: Vec<Vec3>,
    pub interior: Vec<bool>,
}

impl FieldMap {
    /// Assemble a map from samples evaluated in lattice order.
    pub fn from_samples(spec: MapSpec, samples: Vec<FieldSample>) -> Result<Self> {
        let points = spec.points()?;
        if samples.len() != points.len() {
            return Err(invalid(
                "FieldMap",
                format!(
                    "{} samples for a {}-point lattice",
                    samples.len(),
                    points.len()
                ),
            ));
        }
        let (values, interior) = samples.into_iter().map(|s| (s.b, s.interior)).unzip();
        Ok(Self {
            spec,
            points,
            values,
            interior,
        })
    }

    pub fn value(&self, row: usize, col: usize) -> Vec3 {
        self.values[row * self.spec.resolution + col]
    }

    /// Bilinear interpolation at in-plane coordinates `(a, b)`, m.
    pub fn interpolate(&self, a: f64, b: f64) -> Option<Vec3> {
        let n = self.spec.resolution;
        if n < 2 {
            return None;
        }
        let h = self.spec.spacing();
        let fa = (a + 0.5 * self.spec.extent) / h;
        let fb = (b + 0.5 * self.spec.extent) / h;
        let last = (n - 1) as f64;
        if !(0.0..=last).contains(&fa) || !(0.0..=last).contains(&fb) {
            return None;
        }
        let (c0, r0) = (
            (fa.floor() as usize).min(n - 2),
            (fb.floor() as usize).min(n - 2),
        );
        let (ta, tb) = (fa - c0 as f64, fb - r0 as f64);
        let v00 = self.value(r0, c0);
        let v01 = self.value(r0, c0 + 1);
        let v10 = self.value(r0 + 1, c0);
        let v11 = self.value(r0 + 1, c0 + 1);
        Some(
            v00 * ((1.0 - ta) * (1.0 - tb))
                + v01 * (ta * (1.0 - tb))
                + v10 * ((1.0 - ta) * tb)
                + v11 * (ta * tb),
        )
    }

    pub fn max_magnitude(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }
}

/// Serial field map. The `magcoat` crate has a parallel variant with identical output.
pub fn field_map(body: &MagnetizedBody, spec: &MapSpec) -> Result<FieldMap> {
    let samples = spec
        .points()?
        .iter()
        .map(|p| body.evaluate(p))
        .collect::<Result<Vec<_>>>()?;
    FieldMap::from_samples(*spec, samples)
}

/// Mean `|component|` of the field sampled uniformly along a segment.
pub fn mean_abs_component_along(
    body: &MagnetizedBody,
    start: Vec3,
    end: Vec3,
    samples: usize,
    component: usize,
) -> Result<f64> {
    along(body, start, end, samples, |b| b[component].abs())
}

/// Mean `|B|` sampled uniformly along a segment.
pub fn mean_magnitude_along(
    body: &MagnetizedBody,
    start: Vec3,
    end: Vec3,
    samples: usize,
) -> Result<f64> {
    along(body, start, end, samples, |b| b.norm())
}

fn along(
    body: &MagnetizedBody,
    start: Vec3,
    end: Vec3,
    samples: usize,
    f: impl Fn(&Vec3) -> f64,
) -> Result<f64> {
    if samples < 2 {
        return Err(domain("line average needs at least two samples"));
    }
    let mut sum = 0.0;
    for k in 0..samples {
        let t = k as f64 / (samples - 1) as f64;
        sum += f(&body.field_at(&(start + (end - start) * t))?);
    }
    Ok(sum / samples as f64)
}

/// Unit field direction from azimuth φ (about z, from +x) and tilt γ (from the xy plane).
pub fn field_direction(phi: f64, gamma: f64) -> Vec3 {
    Vec3::new(
        gamma.cos() * phi.cos(),
        gamma.cos() * phi.sin(),
        gamma.sin(),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ActuatorModel {
    UniformField {
        /// T
        field_magnitude: f64,
    },
    PointDipole {
        /// A·m²
        dipole_moment: f64,
        /// m
        position: [f64; 3],
    },
}

/// The external rotating magnet, steered by azimuth φ and tilt γ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActuatorMagnet {
    pub model: ActuatorModel,
    pub azimuth_phi: f64,
    pub tilt_gamma: f64,
}

impl ActuatorMagnet {
    pub fn uniform(field_magnitude: f64, azimuth_phi: f64, tilt_gamma: f64) -> Result<Self> {
        if !(field_magnitude > 0.0 && field_magnitude.is_finite()) {
            return Err(invalid(
                "ActuatorMagnet",
                "uniform field magnitude must be positive",
            ));
        }
        Ok(Self {
            model: ActuatorModel::UniformField { field_magnitude },
            azimuth_phi,
            tilt_gamma,
        })
    }

    pub fn point_dipole(
        dipole_moment: f64,
        position: Vec3,
        azimuth_phi: f64,
        tilt_gamma: f64,
    ) -> Result<Self> {
        if !(dipole_moment >= 0.0 && dipole_moment.is_finite()) {
            return Err(invalid(
                "ActuatorMagnet",
                "dipole moment must be finite and non-negative",
            ));
        }
        Ok(Self {
            model: ActuatorModel::PointDipole {
                dipole_moment,
                position: position.into(),
            },
            azimuth_phi,
            tilt_gamma,
        })
    }

    /// Point dipole whose moment is scaled so that `|B(target)| = field`.
    pub fn calibrated_dipole(
        field: f64,
        target: Vec3,
        position: Vec3,
        azimuth_phi: f64,
        tilt_gamma: f64,
    ) -> Result<Self> {
        if !(field > 0.0) {
            return Err(invalid(
                "ActuatorMagnet",
                "calibration field must be positive",
            ));
        }
        let unit = Self::point_dipole(1.0, position, azimuth_phi, tilt_gamma)?;
        let per_unit = unit.field_at(&target)?.norm();
        if !(per_unit > 0.0) {
            return Err(domain("calibration point sees no field from a unit dipole"));
        }
        Self::point_dipole(field / per_unit, position, azimuth_phi, tilt_gamma)
    }

    pub fn direction(&self) -> Vec3 {
        field_direction(self.azimuth_phi, self.tilt_gamma)
    }

    pub fn with_angles(mut self, azimuth_phi: f64, tilt_gamma: f64) -> Self {
        self.azimuth_phi = azimuth_phi;
        self.tilt_gamma = tilt_gamma;
        self
    }

    pub fn field_at(&self, point: &Vec3) -> Result<Vec3> {
        match self.model {
            ActuatorModel::UniformField { field_magnitude } => {
                Ok(self.direction() * field_magnitude)
            }
            ActuatorModel::PointDipole {
                dipole_moment,
                position,
            } => {
                let r = point - Vec3::from(position);
                dipole_field(&(self.direction() * dipole_moment), &r)
            }
        }
    }

    /// Lateral offset along `lateral` (unit) from `base` at which `|B|` first
    /// drops to `threshold`, searched over `[0, max_offset]` by bisection.
    /// Returns `None` if the field never drops that low within the range.
    pub fn lateral_reach(
        &self,
        base: Vec3,
        lateral: Vec3,
        threshold: f64,
        max_offset: f64,
    ) -> Result<Option<f64>> {
        let dir = lateral
            .try_normalize(1e-15)
            .ok_or_else(|| domain("lateral direction must be non-zero"))?;
        let excess =
            |s: f64| -> Result<f64> { Ok(self.field_at(&(base + dir * s))?.norm() - threshold) };
        if excess(0.0)? <= 0.0 {
            return Ok(Some(0.0));
        }
        // coarse scan for the first crossing, then bisection
        let steps = 1000;
        let mut lo = 0.0;
        let mut hi = None;
        for k in 1..=steps {
            let s = max_offset * k as f64 / steps as f64;
            if excess(s)? <= 0.0 {
                hi = Some(s);
                break;
            }
            lo = s;
        }
        let Some(mut hi) = hi else { return Ok(None) };
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if excess(mid)? > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(Some(0.5 * (lo + hi)))
    }
}

pub fn actuator_field_at(magnet: &ActuatorMagnet, point: &Vec3) -> Result<Vec3> {
    magnet.field_at(point)
}
