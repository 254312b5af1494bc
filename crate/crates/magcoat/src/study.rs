//! Magnetostatic studies of the reference bar and the capsule coat.

use std::path::PathBuf;

use magcoat_core::field::{FieldMap, MagnetizedBody, MapSpec};
use magcoat_core::geometry::{realize_pattern, BodySpec};
use magcoat_core::Vec3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::ScenarioConfig;
use crate::error::Result;
use crate::io::{self, ArtifactWriter};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Study {
    BarSnns,
    CapsuleCoat,
}

impl Study {
    pub fn as_str(self) -> &'static str {
        match self {
            Study::BarSnns => "bar_snns",
            Study::CapsuleCoat => "capsule_coat",
        }
    }
}

impl std::str::FromStr for Study {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "bar_snns" => Ok(Study::BarSnns),
            "capsule_coat" => Ok(Study::CapsuleCoat),
            _ => Err(format!("unknown study '{s}' (bar_snns, capsule_coat)")),
        }
    }
}

/// Field map over `spec`, grid points evaluated in parallel, output in lattice order.
pub fn par_field_map(body: &MagnetizedBody, spec: &MapSpec) -> Result<FieldMap> {
    let samples = spec
        .points()?
        .par_iter()
        .map(|p| body.evaluate(p))
        .collect::<magcoat_core::Result<Vec<_>>>()?;
    Ok(FieldMap::from_samples(*spec, samples)?)
}

/// Line averages outside the bar's end face (along x) and top face (along z).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Anisotropy {
    /// Start and end of both lines, measured from the respective face, m.
    pub line_from_face: [f64; 2],
    /// Mean |B| on the long-axis line, T.
    pub long_axis_mean_abs_b: f64,
    /// Mean |B| on the vertical line, T.
    pub vertical_axis_mean_abs_b: f64,
    /// long / vertical magnitude ratio; `None` when both lines see no field.
    pub ratio_long_over_vertical: Option<f64>,
    /// Stronger line over weaker line.
    pub ratio_dominant_over_weaker: Option<f64>,
    /// `"long"` or `"vertical"`; `None` when undefined.
    pub dominant_axis: Option<String>,
    pub ratio_defined: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentReport {
    /// A·m²
    pub moment: [f64; 3],
    pub magnitude: f64,
    /// Unit vector; `None` for a zero moment.
    pub unit: Option<[f64; 3]>,
    /// Angle between the moment and −z, degrees.
    pub angle_from_neg_z_deg: Option<f64>,
    pub cells: usize,
    /// m³
    pub volume: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudySummary {
    pub study: Study,
    pub anisotropy: Option<Anisotropy>,
    pub net_moment: MomentReport,
    pub max_abs_b: f64,
    pub interior_points: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyArtifacts {
    pub dir: PathBuf,
    pub field_maps: Vec<PathBuf>,
    pub summary_path: PathBuf,
    pub manifest: PathBuf,
    pub summary: StudySummary,
}

fn ratio(a: f64, b: f64) -> Option<f64> {
    (b > 0.0 && a.is_finite()).then(|| a / b)
}

/// Lines 4–14 mm outward from the end and top faces of a bar body.
pub fn bar_anisotropy(
    body: &MagnetizedBody,
    spec: &BodySpec,
    samples: usize,
) -> Result<Option<Anisotropy>> {
    let BodySpec::Bar { geometry, .. } = spec else {
        return Ok(None);
    };
    let (near, far) = (4.0e-3, 14.0e-3);
    let half_l = 0.5e-3 * geometry.length_l;
    let half_h = 0.5e-3 * geometry.height_h;
    let line = |face: f64, axis: Vec3| (axis * (face + near), axis * (face + far));
    let (xs, xe) = line(half_l, Vec3::x());
    let (zs, ze) = line(half_h, Vec3::z());
    let long = magcoat_core::field::mean_magnitude_along(body, xs, xe, samples)?;
    let vertical = magcoat_core::field::mean_magnitude_along(body, zs, ze, samples)?;
    let (strong, weak) = if long >= vertical {
        (long, vertical)
    } else {
        (vertical, long)
    };
    let dominant = ratio(strong, weak);
    Ok(Some(Anisotropy {
        line_from_face: [near, far],
        long_axis_mean_abs_b: long,
        vertical_axis_mean_abs_b: vertical,
        ratio_long_over_vertical: ratio(long, vertical),
        ratio_dominant_over_weaker: dominant,
        dominant_axis: dominant
            .map(|_| if long >= vertical { "long" } else { "vertical" }.to_string()),
        ratio_defined: dominant.is_some(),
    }))
}

pub fn moment_report(body: &MagnetizedBody) -> MomentReport {
    let m = body.net_moment();
    let magnitude = m.norm();
    // a sum that cancels to roundoff has no direction
    let scale: f64 = body.cells().iter().map(|c| c.moment.norm()).sum();
    let unit = (magnitude > 1e-12 * scale).then(|| m / magnitude);
    MomentReport {
        moment: m.into(),
        magnitude,
        unit: unit.map(Into::into),
        angle_from_neg_z_deg: unit.map(|u| (-u.z).clamp(-1.0, 1.0).acos().to_degrees()),
        cells: body.cells().len(),
        volume: body.volume(),
    }
}

/// Body for a study: the configured body when it has the right kind, else
/// the reference body at the configured remanence.
pub fn study_body(config: &ScenarioConfig, study: Study) -> BodySpec {
    match (study, &config.body) {
        (Study::BarSnns, b @ BodySpec::Bar { .. })
        | (Study::CapsuleCoat, b @ BodySpec::Coat { .. }) => b.clone(),
        (Study::BarSnns, _) => BodySpec::reference_bar(config.material.remanence),
        (Study::CapsuleCoat, _) => BodySpec::reference_coat(config.material.remanence),
    }
}

/// Field maps on the configured planes plus the anisotropy and net-moment summary.
pub fn run_field_study(
    config: &ScenarioConfig,
    study: Study,
    root: Option<&std::path::Path>,
) -> Result<StudyArtifacts> {
    config.validate()?;
    let spec = study_body(config, study);
    let body = realize_pattern(&spec, config.cell_size_mm)?;
    let extent = match study {
        Study::BarSnns => config.field_study.bar_extent,
        Study::CapsuleCoat => config.field_study.coat_extent,
    };
    let dir = config.run_dir(root).join(study.as_str());
    let mut out = ArtifactWriter::create(&dir)?;
    let mut maps = Vec::new();
    let (mut max_abs_b, mut interior_points) = (0.0f64, 0);
    for map_spec in config.field_study.map_specs(extent) {
        let map = par_field_map(&body, &map_spec)?;
        max_abs_b = max_abs_b.max(map.max_magnitude());
        interior_points += map.interior.iter().filter(|&&i| i).count();
        let name = format!("field_{}.csv", map_spec.plane.label());
        maps.push(out.write(&name, &io::field_map_csv(&map)?)?);
    }
    let summary = StudySummary {
        study,
        anisotropy: bar_anisotropy(&body, &spec, config.field_study.line_samples)?,
        net_moment: moment_report(&body),
        max_abs_b,
        interior_points,
    };
    let summary_path = out.write_json("study.json", &summary)?;
    let manifest = out.finish(
        &format!("field {}", study.as_str()),
        serde_json::to_value(config)?,
    )?;
    Ok(StudyArtifacts {
        dir,
        field_maps: maps,
        summary_path,
        manifest,
        summary,
    })
}
