//! Scenario configuration (JSON) and its validation.

use std::path::{Path, PathBuf};

use magcoat_core::analysis::AnalysisOptions;
use magcoat_core::control::{ActuationSchedule, SchedulePoint, StepperModel};
use magcoat_core::dynamics::{TorqueLaw, DEFAULT_DT};
use magcoat_core::environment::{Preset, Surface};
use magcoat_core::field::{ActuatorMagnet, ActuatorModel, MapSpec, Plane};
use magcoat_core::geometry::{BodySpec, Material, DEFAULT_CELL_SIZE_MM, DEFAULT_REMANENCE};
use magcoat_core::sensing::{CalibrationModel, CameraModel};
use magcoat_core::simulation::Thresholds;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Environment variable naming the default output root.
pub const OUT_ENV: &str = "MAGCOAT_OUT";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SurfaceChoice {
    Preset(Preset),
    Custom(Surface),
}

impl SurfaceChoice {
    pub fn surface(&self) -> Surface {
        match self {
            SurfaceChoice::Preset(p) => p.surface(),
            SurfaceChoice::Custom(s) => s.clone(),
        }
    }
}

/// What the actuator does over the run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Motion {
    /// Hold `heading_deg` and roll at the roll motor rate.
    Roll { heading_deg: f64, duration_s: f64 },
    /// Yaw-then-roll legs through world targets, m.
    Waypoints { targets: Vec<[f64; 2]> },
    /// Explicit command samples.
    Schedule {
        points: Vec<SchedulePoint>,
        quantized: bool,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StartPose {
    pub x_m: f64,
    pub y_m: f64,
    pub heading_deg: f64,
}

/// Sampling planes for the field study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FieldStudyOptions {
    pub resolution: usize,
    /// Square map side for the bar study, m.
    pub bar_extent: f64,
    /// Square map side for the coat study, m.
    pub coat_extent: f64,
    pub planes: Vec<Plane>,
    /// Points per anisotropy line.
    pub line_samples: usize,
}

impl Default for FieldStudyOptions {
    fn default() -> Self {
        Self {
            resolution: 101,
            bar_extent: 0.05,
            coat_extent: 0.1,
            planes: vec![Plane::Xz, Plane::Yz, Plane::Xy],
            line_samples: 101,
        }
    }
}

impl FieldStudyOptions {
    pub fn map_specs(&self, extent: f64) -> Vec<MapSpec> {
        self.planes
            .iter()
            .map(|&plane| MapSpec {
                plane,
                offset: 0.0,
                extent,
                resolution: self.resolution,
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario_id: String,
    pub body: BodySpec,
    pub cell_size_mm: f64,
    pub material: Material,
    /// Added to the coat mass, kg.
    pub payload_mass_kg: f64,
    /// Replaces the density-derived mass, kg.
    pub mass_kg: Option<f64>,
    /// Replaces the solver's net moment magnitude, A·m².
    pub net_moment: Option<f64>,
    pub actuator: ActuatorMagnet,
    pub yaw_motor: StepperModel,
    pub roll_motor: StepperModel,
    pub surface: SurfaceChoice,
    pub motion: Motion,
    pub start: StartPose,
    /// Extra time simulated after the schedule ends, s.
    pub settle_s: f64,
    pub dt: f64,
    /// `[c_psi, c_alpha]`, N·m·s/rad.
    pub damping: Option<[f64; 2]>,
    pub torque_law: TorqueLaw,
    /// m
    pub effective_rolling_radius: Option<f64>,
    pub thresholds: Thresholds,
    pub quantize_steppers: bool,
    pub camera: CameraModel,
    /// Marker distance from the capsule center, m.
    pub marker_offset: f64,
    pub calibration: CalibrationModel,
    /// Disable camera noise.
    pub noiseless: bool,
    pub analysis: AnalysisOptions,
    pub seed: u64,
    pub record_every: usize,
    pub field_study: FieldStudyOptions,
    /// Also write SVG plots of the tracks.
    pub plots: bool,
    pub output_dir: Option<PathBuf>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            scenario_id: "scenario".into(),
            body: BodySpec::reference_coat(DEFAULT_REMANENCE),
            cell_size_mm: DEFAULT_CELL_SIZE_MM,
            material: Material::default(),
            payload_mass_kg: 0.0,
            mass_kg: None,
            net_moment: None,
            actuator: ActuatorMagnet {
                model: ActuatorModel::UniformField {
                    field_magnitude: 0.0308,
                },
                azimuth_phi: 0.0,
                tilt_gamma: 0.0,
            },
            yaw_motor: StepperModel::yaw_default(),
            roll_motor: StepperModel::roll_default(),
            surface: SurfaceChoice::Preset(Preset::SmoothPla),
            motion: Motion::Roll {
                heading_deg: 90.0,
                duration_s: 8.0,
            },
            start: StartPose {
                x_m: 0.0,
                y_m: -0.032,
                heading_deg: 90.0,
            },
            settle_s: 0.5,
            dt: DEFAULT_DT,
            damping: None,
            torque_law: TorqueLaw::default(),
            effective_rolling_radius: None,
            thresholds: Thresholds::default(),
            quantize_steppers: false,
            camera: CameraModel::default(),
            marker_offset: 0.012,
            calibration: CalibrationModel::default(),
            noiseless: false,
            analysis: AnalysisOptions::default(),
            seed: 1,
            record_every: 5,
            field_study: FieldStudyOptions::default(),
            plots: false,
            output_dir: None,
        }
    }
}

fn at<T>(field: &str, r: magcoat_core::Result<T>) -> Result<T> {
    r.map_err(|e| Error::config(field, e.to_string()))
}

fn check(field: &str, ok: bool, message: &str) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::config(field, message))
    }
}

fn positive(v: f64) -> bool {
    v > 0.0 && v.is_finite()
}

impl ScenarioConfig {
    /// Default scenario on a named surface preset.
    pub fn for_preset(preset: Preset) -> Self {
        Self {
            scenario_id: preset.as_str().into(),
            surface: SurfaceChoice::Preset(preset),
            ..Self::default()
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| {
            Error::config(
                format!("line {} column {}", e.line(), e.column()),
                e.to_string(),
            )
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Final output directory: explicit dir, else `$MAGCOAT_OUT`, else `./out`,
    /// with the scenario id appended.
    pub fn run_dir(&self, root: Option<&Path>) -> PathBuf {
        let base = root
            .map(Path::to_path_buf)
            .or_else(|| self.output_dir.clone())
            .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("out"));
        base.join(&self.scenario_id)
    }

    pub fn effective_camera(&self) -> CameraModel {
        CameraModel {
            pixel_noise_sigma: if self.noiseless {
                0.0
            } else {
                self.camera.pixel_noise_sigma
            },
            ..self.camera
        }
    }

    /// Field-level checks; the first failure is reported.
    pub fn validate(&self) -> Result<()> {
        check(
            "scenario_id",
            !self.scenario_id.is_empty()
                && self
                    .scenario_id
                    .chars()
                    .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-'),
            "must be non-empty and use only [A-Za-z0-9_-]",
        )?;
        match &self.body {
            BodySpec::Bar { geometry, pattern } => {
                at("body.geometry", geometry.validate())?;
                at("body.pattern", pattern.validate_common())?;
            }
            BodySpec::Coat {
                geometry,
                upper,
                lower,
            } => {
                at("body.geometry", geometry.validate())?;
                at("body.upper", upper.validate_common())?;
                at("body.lower", lower.validate_common())?;
            }
        }
        check(
            "cell_size_mm",
            positive(self.cell_size_mm),
            "must be positive",
        )?;
        check(
            "material.density",
            positive(self.material.density),
            "must be positive",
        )?;
        check(
            "payload_mass_kg",
            self.payload_mass_kg >= 0.0 && self.payload_mass_kg.is_finite(),
            "must be non-negative",
        )?;
        if let Some(m) = self.mass_kg {
            check("mass_kg", positive(m), "must be positive")?;
        }
        if let Some(m) = self.net_moment {
            check(
                "net_moment",
                m >= 0.0 && m.is_finite(),
                "must be non-negative",
            )?;
        }
        match self.actuator.model {
            ActuatorModel::UniformField { field_magnitude } => check(
                "actuator.model.field_magnitude",
                positive(field_magnitude),
                "must be positive",
            )?,
            ActuatorModel::PointDipole {
                dipole_moment,
                position,
            } => {
                check(
                    "actuator.model.dipole_moment",
                    dipole_moment >= 0.0 && dipole_moment.is_finite(),
                    "must be non-negative",
                )?;
                check(
                    "actuator.model.position",
                    position.iter().all(|v| v.is_finite()),
                    "must be finite",
                )?;
            }
        }
        at("yaw_motor", self.yaw_motor.validate())?;
        at("roll_motor", self.roll_motor.validate())?;
        if let SurfaceChoice::Custom(s) = &self.surface {
            at("surface.custom", s.validate())?;
        }
        match &self.motion {
            Motion::Roll {
                heading_deg,
                duration_s,
            } => {
                check(
                    "motion.heading_deg",
                    heading_deg.is_finite(),
                    "must be finite",
                )?;
                check(
                    "motion.duration_s",
                    *duration_s >= 0.0 && duration_s.is_finite(),
                    "must be non-negative",
                )?;
            }
            Motion::Waypoints { targets } => {
                check(
                    "motion.targets",
                    !targets.is_empty(),
                    "needs at least one target",
                )?;
                check(
                    "motion.targets",
                    targets.iter().flatten().all(|v| v.is_finite()),
                    "must be finite",
                )?;
            }
            Motion::Schedule { points, quantized } => {
                let s = ActuationSchedule {
                    samples: points.clone(),
                    quantized: *quantized,
                };
                at("motion.points", s.validate())?;
            }
        }
        check(
            "start",
            [self.start.x_m, self.start.y_m, self.start.heading_deg]
                .iter()
                .all(|v| v.is_finite()),
            "must be finite",
        )?;
        check(
            "start",
            self.surface
                .surface()
                .contains(self.start.x_m, self.start.y_m),
            "lies outside the surface extent",
        )?;
        check(
            "settle_s",
            self.settle_s >= 0.0 && self.settle_s.is_finite(),
            "must be non-negative",
        )?;
        check("dt", positive(self.dt), "must be positive")?;
        if let Some(c) = self.damping {
            check(
                "damping",
                c.iter().all(|v| *v >= 0.0 && v.is_finite()),
                "must be non-negative",
            )?;
        }
        if let Some(r) = self.effective_rolling_radius {
            check("effective_rolling_radius", positive(r), "must be positive")?;
        }
        for (name, v) in [
            ("thresholds.tau_s_yaw", self.thresholds.tau_s_yaw),
            ("thresholds.tau_s_roll", self.thresholds.tau_s_roll),
        ] {
            if let Some(v) = v {
                check(name, v >= 0.0 && v.is_finite(), "must be non-negative")?;
            }
        }
        at("camera", self.camera.validate())?;
        check(
            "marker_offset",
            positive(self.marker_offset),
            "must be positive",
        )?;
        check(
            "analysis.spacing_mm",
            positive(self.analysis.spacing_mm),
            "must be positive",
        )?;
        at("analysis.hampel", self.analysis.hampel.validate())?;
        check("record_every", self.record_every >= 1, "must be at least 1")?;
        let fs = &self.field_study;
        check(
            "field_study.resolution",
            fs.resolution >= 1,
            "must be at least 1",
        )?;
        check(
            "field_study.bar_extent",
            positive(fs.bar_extent),
            "must be positive",
        )?;
        check(
            "field_study.coat_extent",
            positive(fs.coat_extent),
            "must be positive",
        )?;
        check(
            "field_study.line_samples",
            fs.line_samples >= 2,
            "must be at least 2",
        )?;
        Ok(())
    }
}
