//! End-to-end scenario: schedule, simulation, camera, analysis, artifacts.

use std::path::{Path, PathBuf};

use magcoat_core::analysis::{analyze, Analysis, MetricsReport, Stage, TrackRecord, TrackSample};
use magcoat_core::control::{plan_through, plan_to_schedule, ActuationSchedule, Pose2};
use magcoat_core::geometry::{realize_pattern, BodyProperties, BodySpec};
use magcoat_core::sensing::{calibrate, default_fiducials, observe_track, CalibrationFit};
use magcoat_core::simulation::{roll_schedule, simulate, SimulationResult, SimulationSetup};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::{Motion, ScenarioConfig};
use crate::error::{Error, Result};
use crate::io::{self, ArtifactWriter};
use crate::plot;

/// Stream of the seeded generator reserved for the camera.
const CAMERA_STREAM: u64 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub scenario_id: String,
    pub net_moment: f64,
    pub mass: f64,
    pub duration: f64,
    pub slip_events: usize,
    pub slip_steps: usize,
    /// m
    pub net_displacement: f64,
    pub final_state: magcoat_core::dynamics::CapsuleState,
    /// mm
    pub calibration_residual: f64,
    pub frames: usize,
    /// Set when the sensed track could not be analysed (for example a capsule
    /// that never moved under a noiseless camera).
    pub analysis_error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunArtifacts {
    pub dir: PathBuf,
    pub true_track: PathBuf,
    pub sensed_track: PathBuf,
    pub filtered_track: Option<PathBuf>,
    pub field_maps: Vec<PathBuf>,
    pub metrics: Option<PathBuf>,
    pub manifest: PathBuf,
    pub summary: RunSummary,
    pub report: Option<MetricsReport>,
}

/// In-memory products of a scenario, before anything is written.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioRun {
    pub schedule: ActuationSchedule,
    pub simulation: SimulationResult,
    pub calibration: CalibrationFit,
    pub true_track: TrackRecord,
    pub sensed: TrackRecord,
    pub analysis: std::result::Result<Analysis, magcoat_core::Error>,
    pub summary: RunSummary,
}

pub fn body_properties(config: &ScenarioConfig) -> Result<BodyProperties> {
    let BodySpec::Coat { geometry, .. } = &config.body else {
        return Err(Error::config(
            "body",
            "scenarios need a coat body; bars only support field studies",
        ));
    };
    let mut props = BodyProperties::for_coat(geometry, &config.material, config.payload_mass_kg)?;
    if let Some(m) = config.mass_kg {
        props.mass = m;
    }
    Ok(props)
}

/// Net moment magnitude: the configured override, else the solver's value.
pub fn net_moment(config: &ScenarioConfig) -> Result<f64> {
    if let Some(m) = config.net_moment {
        return Ok(m);
    }
    Ok(realize_pattern(&config.body, config.cell_size_mm)?
        .net_moment()
        .norm())
}

pub fn build_schedule(config: &ScenarioConfig, rolling_radius: f64) -> Result<ActuationSchedule> {
    let heading = config.start.heading_deg.to_radians();
    let q = config.quantize_steppers;
    Ok(match &config.motion {
        Motion::Roll {
            heading_deg,
            duration_s,
        } => roll_schedule(heading_deg.to_radians(), &config.roll_motor, *duration_s, q),
        Motion::Waypoints { targets } => {
            let start = Pose2 {
                x: config.start.x_m,
                y: config.start.y_m,
                psi: heading,
            };
            let pts: Vec<(f64, f64)> = targets.iter().map(|t| (t[0], t[1])).collect();
            let plan = plan_through(start, &pts, rolling_radius)?;
            plan_to_schedule(&plan, &config.yaw_motor, &config.roll_motor, q)?
        }
        Motion::Schedule { points, quantized } => ActuationSchedule {
            samples: points.clone(),
            quantized: *quantized,
        },
    })
}

/// Run the pipeline without touching the filesystem.
pub fn execute(config: &ScenarioConfig) -> Result<ScenarioRun> {
    config.validate()?;
    let body = body_properties(config)?;
    let m = net_moment(config)?;
    let radius = config
        .effective_rolling_radius
        .unwrap_or(body.rolling_radius);
    let schedule = build_schedule(config, radius)?;
    let duration = schedule.end_time() + config.settle_s;
    let setup = SimulationSetup {
        body,
        net_moment: m,
        actuator: config.actuator,
        surface: config.surface.surface(),
        schedule: schedule.clone(),
        start: Pose2 {
            x: config.start.x_m,
            y: config.start.y_m,
            psi: config.start.heading_deg.to_radians(),
        },
        duration,
        dt: config.dt,
        damping: config.damping.map(|c| (c[0], c[1])),
        torque_law: config.torque_law,
        effective_rolling_radius: config.effective_rolling_radius,
        thresholds: config.thresholds,
        seed: config.seed,
        record_every: config.record_every,
    };
    let simulation = simulate(&setup)?;
    let true_track = simulation.true_track(&config.scenario_id)?;

    let camera = config.effective_camera();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(CAMERA_STREAM);
    let calibration = calibrate(&camera, &default_fiducials(), config.calibration, &mut rng)?;
    let observations = observe_track(
        &camera,
        &calibration,
        &simulation.states,
        config.marker_offset,
        &mut rng,
    )?;
    let sensed = TrackRecord::new(
        config.scenario_id.clone(),
        Stage::Raw,
        observations
            .iter()
            .map(|o| TrackSample {
                t: o.t,
                x: o.center[0],
                y: o.center[1],
                heading: o.heading,
            })
            .collect(),
    )?;
    let analysis = analyze(&sensed, &config.analysis);
    let analysis = match analysis {
        Err(e @ (magcoat_core::Error::Degenerate(_) | magcoat_core::Error::Domain(_))) => Err(e),
        Err(e) => return Err(e.into()),
        Ok(a) => Ok(a),
    };
    let summary = RunSummary {
        scenario_id: config.scenario_id.clone(),
        net_moment: m,
        mass: body.mass,
        duration,
        slip_events: simulation.slip_events,
        slip_steps: simulation.slip_steps,
        net_displacement: simulation.net_displacement(),
        final_state: *simulation.final_state(),
        calibration_residual: calibration.residual_rms,
        frames: observations.len(),
        analysis_error: analysis.as_ref().err().map(|e| e.to_string()),
    };
    Ok(ScenarioRun {
        schedule,
        simulation,
        calibration,
        true_track,
        sensed,
        analysis,
        summary,
    })
}

/// Run a scenario and write its artifact directory.
pub fn run_scenario(config: &ScenarioConfig, root: Option<&Path>) -> Result<RunArtifacts> {
    let run = execute(config)?;
    let dir = config.run_dir(root);
    let mut out = ArtifactWriter::create(&dir)?;
    out.write_json("config.json", config)?;
    out.write("schedule.csv", &io::schedule_csv(&run.schedule)?)?;
    let true_track = out.write("true_track.csv", &io::track_csv(&run.true_track)?)?;
    let sensed_track = out.write("sensed_track.csv", &io::track_csv(&run.sensed)?)?;
    let (mut filtered_track, mut metrics, mut report) = (None, None, None);
    if let Ok(a) = &run.analysis {
        out.write("equalized_track.csv", &io::track_csv(&a.equalized)?)?;
        filtered_track = Some(out.write("filtered_track.csv", &io::track_csv(&a.filtered)?)?);
        metrics = Some(out.write_json("metrics.json", &a.metrics)?);
        out.write_json("metrics_raw.json", &a.raw_metrics)?;
        out.write("angle_deviation.csv", &deviation_csv(a)?)?;
        report = Some(a.metrics.clone());
    }
    out.write_json("summary.json", &run.summary)?;
    if config.plots {
        out.write("tracks.svg", plot::tracks_svg(&run).as_bytes())?;
        if let Ok(a) = &run.analysis {
            out.write("angle_deviation.svg", plot::deviation_svg(a).as_bytes())?;
        }
    }
    let manifest = out.finish("sim", serde_json::to_value(config)?)?;
    Ok(RunArtifacts {
        dir,
        true_track,
        sensed_track,
        filtered_track,
        field_maps: Vec::new(),
        metrics,
        manifest,
        summary: run.summary,
        report,
    })
}

/// Travel-direction deviation along the equalized track, before and after filtering.
fn deviation_csv(a: &Analysis) -> Result<Vec<u8>> {
    let (raw, _) = magcoat_core::analysis::displacement_angles(&a.equalized);
    let (filtered, _) = magcoat_core::analysis::displacement_angles(&a.filtered);
    io::series_csv(
        &["index", "raw_deg", "filtered_deg"],
        raw.iter()
            .zip(&filtered)
            .enumerate()
            .map(|(k, (r, f))| vec![k as f64, r - 90.0, f - 90.0]),
    )
}
