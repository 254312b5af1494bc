//! Trajectory post-processing: arc-length density equalization, Hampel
//! spike filtering of the travel-direction series, and the RMS error metrics
//! against a nominal path along +y.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use serde::{Deserialize, Serialize};

use crate::error::{domain, invalid, Error, Result};

/// Gaussian consistency factor relating MAD to standard deviation.
pub const MAD_SCALE: f64 = 1.4826;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackSample {
    pub t: f64,
    /// m
    pub x: f64,
    pub y: f64,
    /// rad
    pub heading: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Raw,
    Equalized,
    Filtered,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackRecord {
    pub scenario_id: String,
    pub stage: Stage,
    pub samples: Vec<TrackSample>,
}

impl TrackRecord {
    pub fn new(
        scenario_id: impl Into<String>,
        stage: Stage,
        samples: Vec<TrackSample>,
    ) -> Result<Self> {
        let track = Self {
            scenario_id: scenario_id.into(),
            stage,
            samples,
        };
        track.validate()?;
        Ok(track)
    }

    pub fn validate(&self) -> Result<()> {
        if self.samples.windows(2).any(|w| !(w[1].t > w[0].t)) {
            return Err(invalid(
                "TrackRecord",
                "sample times must be strictly increasing",
            ));
        }
        if self.samples.iter().any(|s| {
            !(s.t.is_finite() && s.x.is_finite() && s.y.is_finite() && s.heading.is_finite())
        }) {
            return Err(invalid("TrackRecord", "samples must be finite"));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Polyline length, m.
    pub fn arc_length(&self) -> f64 {
        self.samples
            .windows(2)
            .map(|w| (w[1].x - w[0].x).hypot(w[1].y - w[0].y))
            .sum()
    }
}

/// Shift `angle` by whole turns so it lies within ±π of `reference`.
pub fn unwrap_near(angle: f64, reference: f64) -> f64 {
    let two_pi = 2.0 * core::f64::consts::PI;
    angle - two_pi * ((angle - reference) / two_pi).round()
}

/// Resample the polyline by arc length every `spacing_mm`, keeping both endpoints.
pub fn equalize_density(track: &TrackRecord, spacing_mm: f64) -> Result<TrackRecord> {
    if !(spacing_mm > 0.0 && spacing_mm.is_finite()) {
        return Err(domain("spacing must be positive"));
    }
    let s = &track.samples;
    if s.len() < 2 {
        return Err(Error::Degenerate(
            "equalization needs at least two samples".into(),
        ));
    }
    let mut cum = Vec::with_capacity(s.len());
    cum.push(0.0);
    for w in s.windows(2) {
        let last = *cum.last().unwrap();
        cum.push(last + (w[1].x - w[0].x).hypot(w[1].y - w[0].y));
    }
    let total = *cum.last().unwrap();
    if !(total > 0.0) {
        return Err(Error::Degenerate("track has zero length".into()));
    }
    let spacing = spacing_mm * 1e-3;
    let n = (total / spacing + 1e-9).floor() as usize;
    let mut targets: Vec<f64> = (0..=n).map(|k| k as f64 * spacing).collect();
    if total - n as f64 * spacing > 1e-9 * total {
        targets.push(total);
    } else if let Some(last) = targets.last_mut() {
        *last = total;
    }

    let mut out = Vec::with_capacity(targets.len());
    let mut seg = 0;
    for &a in &targets {
        while seg + 2 < cum.len() && cum[seg + 1] < a {
            seg += 1;
        }
        // skip zero-length segments at this arc position
        while seg + 2 < cum.len() && cum[seg + 1] <= cum[seg] {
            seg += 1;
        }
        let (p, q) = (s[seg], s[seg + 1]);
        let len = cum[seg + 1] - cum[seg];
        let u = if len > 0.0 {
            ((a - cum[seg]) / len).clamp(0.0, 1.0)
        } else {
            0.0
        };
        let dh = unwrap_near(q.heading, p.heading) - p.heading;
        out.push(TrackSample {
            t: p.t + u * (q.t - p.t),
            x: p.x + u * (q.x - p.x),
            y: p.y + u * (q.y - p.y),
            heading: p.heading + u * dh,
        });
    }
    // stationary stretches collapse to one arc position; keep times increasing
    out.dedup_by(|b, a| b.t <= a.t);
    TrackRecord::new(track.scenario_id.clone(), Stage::Equalized, out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HampelOptions {
    pub window: usize,
    pub n_sigma: f64,
    /// Scale MAD by 1.4826 before applying `n_sigma`.
    pub mad_consistency: bool,
    /// Absolute deviation floor used when MAD vanishes.
    pub mad_floor: f64,
}

impl Default for HampelOptions {
    fn default() -> Self {
        Self {
            window: 11,
            n_sigma: 1.0,
            mad_consistency: true,
            mad_floor: 1e-12,
        }
    }
}

impl HampelOptions {
    pub fn validate(&self) -> Result<()> {
        if self.window < 3 || self.window.is_multiple_of(2) {
            return Err(invalid(
                "HampelOptions",
                alloc::format!("window {} must be odd and >= 3", self.window),
            ));
        }
        if !(self.n_sigma >= 0.0 && self.n_sigma.is_finite()) {
            return Err(invalid(
                "HampelOptions",
                "n_sigma must be finite and non-negative",
            ));
        }
        if !(self.mad_floor >= 0.0) {
            return Err(invalid("HampelOptions", "mad_floor must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HampelOutput {
    pub filtered: Vec<f64>,
    /// Distinct replaced indices, ascending.
    pub replaced: Vec<usize>,
}

fn median(buf: &mut [f64]) -> f64 {
    buf.sort_by(|a, b| a.total_cmp(b));
    let n = buf.len();
    if n % 2 == 1 {
        buf[n / 2]
    } else {
        0.5 * (buf[n / 2 - 1] + buf[n / 2])
    }
}

/// One sweep of the Hampel identifier over `series`.
///
/// Windows are centered and clamped to stay full near the ends. Medians and
/// MADs come from the input series, not from values already replaced.
pub fn hampel_pass(series: &[f64], opts: &HampelOptions) -> Result<HampelOutput> {
    opts.validate()?;
    let n = series.len();
    if n < opts.window {
        return Err(domain(alloc::format!(
            "series of {n} samples is shorter than window {}",
            opts.window
        )));
    }
    let half = opts.window / 2;
    let scale = if opts.mad_consistency { MAD_SCALE } else { 1.0 };
    let mut filtered = series.to_vec();
    let mut replaced = Vec::new();
    let mut buf = Vec::with_capacity(opts.window);
    for i in 0..n {
        let start = i.saturating_sub(half).min(n - opts.window);
        let win = &series[start..start + opts.window];
        buf.clear();
        buf.extend_from_slice(win);
        let med = median(&mut buf);
        buf.clear();
        buf.extend(win.iter().map(|v| (v - med).abs()));
        let mad = median(&mut buf);
        let threshold = (opts.n_sigma * scale * mad).max(opts.mad_floor);
        if (series[i] - med).abs() > threshold {
            filtered[i] = med;
            replaced.push(i);
        }
    }
    Ok(HampelOutput { filtered, replaced })
}

/// Hampel passes repeated until a sweep replaces nothing.
///
/// The result is a fixed point of [`hampel_pass`], so filtering the output
/// again changes nothing.
pub fn hampel_filter(series: &[f64], opts: &HampelOptions) -> Result<HampelOutput> {
    let mut current = series.to_vec();
    let mut replaced: Vec<usize> = Vec::new();
    // each sweep that changes something moves values onto window medians;
    // the bound is a safety net, convergence is fast in practice
    for _ in 0..series.len().max(1) * 4 {
        let pass = hampel_pass(&current, opts)?;
        if pass.replaced.is_empty() {
            replaced.sort_unstable();
            replaced.dedup();
            return Ok(HampelOutput {
                filtered: current,
                replaced,
            });
        }
        replaced.extend(pass.replaced);
        current = pass.filtered;
    }
    Err(Error::Degenerate(
        "Hampel filter failed to reach a fixed point".into(),
    ))
}

/// `√(mean x²)` of the track's lateral offsets, mm.
pub fn rms_x(track: &TrackRecord) -> Result<f64> {
    if track.is_empty() {
        return Err(domain("rms_x of an empty track"));
    }
    let sum: f64 = track.samples.iter().map(|s| s.x * s.x).sum();
    Ok((sum / track.len() as f64).sqrt() * 1e3)
}

/// Travel directions of successive displacements in degrees, each on the
/// branch within ±180° of +y, plus the number of zero-length displacements
/// skipped. Anchoring to the nominal direction keeps noisy near-stationary
/// segments from walking the series through whole turns.
pub fn displacement_angles(track: &TrackRecord) -> (Vec<f64>, usize) {
    let mut angles = Vec::new();
    let mut skipped = 0;
    let nominal = core::f64::consts::FRAC_PI_2;
    for w in track.samples.windows(2) {
        let (dx, dy) = (w[1].x - w[0].x, w[1].y - w[0].y);
        if dx == 0.0 && dy == 0.0 {
            skipped += 1;
            continue;
        }
        angles.push(unwrap_near(dy.atan2(dx), nominal).to_degrees());
    }
    (angles, skipped)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AngleMetric {
    /// degrees
    pub rms_angle: f64,
    /// Valid displacement pairs, the N of the mean.
    pub n_pairs: usize,
    pub skipped: usize,
    pub replaced: Vec<usize>,
    /// Deviation series from 90° after filtering, degrees.
    pub deviations: Vec<f64>,
}

/// RMS deviation of the travel direction from +y. The Hampel filter runs on
/// the angle series when it has at least `window` entries; pass `None` to skip it.
pub fn rms_angle(track: &TrackRecord, hampel: Option<&HampelOptions>) -> Result<AngleMetric> {
    if track.len() < 2 {
        return Err(domain("rms_angle needs at least two samples"));
    }
    let (angles, skipped) = displacement_angles(track);
    if angles.is_empty() {
        return Err(Error::Degenerate("all displacements are zero".into()));
    }
    let mut dev: Vec<f64> = angles.iter().map(|a| a - 90.0).collect();
    let mut replaced = Vec::new();
    if let Some(opts) = hampel {
        if dev.len() >= opts.window {
            let out = hampel_filter(&dev, opts)?;
            dev = out.filtered;
            replaced = out.replaced;
        }
    }
    let n = dev.len();
    let rms = (dev.iter().map(|d| d * d).sum::<f64>() / n as f64).sqrt();
    Ok(AngleMetric {
        rms_angle: rms,
        n_pairs: n,
        skipped,
        replaced,
        deviations: dev,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalysisOptions {
    /// Equalization spacing, mm.
    pub spacing_mm: f64,
    pub hampel: HampelOptions,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        Self {
            spacing_mm: 2.0,
            hampel: HampelOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub scenario_id: String,
    pub rms_x_mm: f64,
    pub rms_angle_deg: f64,
    pub n_samples: usize,
    pub n_outliers_replaced: usize,
    pub pipeline: Vec<String>,
}

/// Products of the full raw → equalized → hampel → metrics chain.
#[derive(Debug, Clone, PartialEq)]
pub struct Analysis {
    pub equalized: TrackRecord,
    pub filtered: TrackRecord,
    pub metrics: MetricsReport,
    /// Same metrics on the raw samples without equalization or filtering.
    pub raw_metrics: MetricsReport,
}

/// Run the fixed post-processing chain on a raw track.
pub fn analyze(raw: &TrackRecord, opts: &AnalysisOptions) -> Result<Analysis> {
    raw.validate()?;
    opts.hampel.validate()?;
    let raw_angle = rms_angle(raw, None)?;
    let raw_metrics = MetricsReport {
        scenario_id: raw.scenario_id.clone(),
        rms_x_mm: rms_x(raw)?,
        rms_angle_deg: raw_angle.rms_angle,
        n_samples: raw.len(),
        n_outliers_replaced: 0,
        pipeline: alloc::vec!["raw".to_string(), "metrics".to_string()],
    };

    let equalized = equalize_density(raw, opts.spacing_mm)?;
    let angle = rms_angle(&equalized, Some(&opts.hampel))?;
    let filtered = rebuild_from_angles(&equalized, &angle.deviations);
    let metrics = MetricsReport {
        scenario_id: raw.scenario_id.clone(),
        rms_x_mm: rms_x(&equalized)?,
        rms_angle_deg: angle.rms_angle,
        n_samples: equalized.len(),
        n_outliers_replaced: angle.replaced.len(),
        pipeline: ["raw", "equalized", "hampel", "metrics"]
            .iter()
            .map(|s| s.to_string())
            .collect(),
    };
    Ok(Analysis {
        equalized,
        filtered,
        metrics,
        raw_metrics,
    })
}

/// Re-integrate positions from filtered travel directions, keeping the
/// equalized segment lengths and times. Headings become the travel direction.
fn rebuild_from_angles(equalized: &TrackRecord, deviations: &[f64]) -> TrackRecord {
    let s = &equalized.samples;
    let mut out = Vec::with_capacity(s.len());
    out.push(s[0]);
    let mut k = 0;
    for w in s.windows(2) {
        let last = *out.last().unwrap();
        let len = (w[1].x - w[0].x).hypot(w[1].y - w[0].y);
        let heading = if len > 0.0 && k < deviations.len() {
            let a = (deviations[k] + 90.0).to_radians();
            k += 1;
            a
        } else {
            last.heading
        };
        out.push(TrackSample {
            t: w[1].t,
            x: last.x + len * heading.cos(),
            y: last.y + len * heading.sin(),
            heading,
        });
    }
    TrackRecord {
        scenario_id: equalized.scenario_id.clone(),
        stage: Stage::Filtered,
        samples: out,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn track(points: &[(f64, f64)]) -> TrackRecord {
        let samples = points
            .iter()
            .enumerate()
            .map(|(i, &(x, y))| TrackSample {
                t: i as f64,
                x,
                y,
                heading: 0.0,
            })
            .collect();
        TrackRecord::new("t", Stage::Raw, samples).unwrap()
    }

    #[test]
    fn rms_x_examples() {
        assert_eq!(rms_x(&track(&[(0.0, 0.0), (0.0, 1.0)])).unwrap(), 0.0);
        assert!((rms_x(&track(&[(3e-3, 0.0), (4e-3, 1.0)])).unwrap() - 3.5355).abs() < 1e-4);
        let mirrored = rms_x(&track(&[(-3e-3, 0.0), (-4e-3, 1.0)])).unwrap();
        assert_eq!(
            mirrored,
            rms_x(&track(&[(3e-3, 0.0), (4e-3, 1.0)])).unwrap()
        );
        assert!(rms_x(&TrackRecord {
            scenario_id: String::new(),
            stage: Stage::Raw,
            samples: Vec::new()
        })
        .is_err());
    }

    #[test]
    fn rms_angle_examples() {
        let straight = track(&[(0.0, 0.0), (0.0, 1.0), (0.0, 2.0)]);
        assert_eq!(rms_angle(&straight, None).unwrap().rms_angle, 0.0);
        let along_x = track(&[(0.0, 0.0), (1.0, 0.0)]);
        assert_relative_eq!(
            rms_angle(&along_x, None).unwrap().rms_angle,
            90.0,
            epsilon = 1e-12
        );
        let (a, b) = (80f64.to_radians(), 100f64.to_radians());
        let two = track(&[
            (0.0, 0.0),
            (a.cos(), a.sin()),
            (a.cos() + b.cos(), a.sin() + b.sin()),
        ]);
        assert_relative_eq!(
            rms_angle(&two, None).unwrap().rms_angle,
            10.0,
            epsilon = 1e-9
        );
    }

    #[test]
    fn zero_displacements_skipped() {
        let t = track(&[(0.0, 0.0), (0.0, 0.0), (0.0, 1.0)]);
        let m = rms_angle(&t, None).unwrap();
        assert_eq!((m.n_pairs, m.skipped), (1, 1));
        assert!(matches!(
            rms_angle(&track(&[(0.0, 0.0), (0.0, 0.0)]), None),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn equalize_clustered_track() {
        let ys = [0.0, 1.0, 2.0, 2.5, 3.0, 40.0, 41.0, 99.0, 100.0];
        let t = track(&ys.iter().map(|y| (0.0, y * 1e-3)).collect::<Vec<_>>());
        let e = equalize_density(&t, 10.0).unwrap();
        assert_eq!(e.len(), 11);
        for (k, s) in e.samples.iter().enumerate() {
            assert!((s.y - k as f64 * 10e-3).abs() < 1e-12);
        }
        let ends = equalize_density(&t, 500.0).unwrap();
        assert_eq!(ends.len(), 2);
        assert_eq!((ends.samples[0].y, ends.samples[1].y), (0.0, 0.1));
        assert!(equalize_density(&track(&[(0.0, 0.0), (0.0, 0.0)]), 1.0).is_err());
    }

    #[test]
    fn hampel_examples() {
        let opts = HampelOptions::default();
        let flat = [2.5; 20];
        let out = hampel_filter(&flat, &opts).unwrap();
        assert_eq!(out.filtered, flat);
        assert!(out.replaced.is_empty());

        let mut spike = [0.0; 21];
        spike[10] = 100.0;
        let out = hampel_filter(&spike, &opts).unwrap();
        assert_eq!(out.filtered, [0.0; 21]);
        assert_eq!(out.replaced, [10]);

        assert!(hampel_filter(&spike, &HampelOptions { window: 10, ..opts }).is_err());
        assert!(hampel_filter(&spike[..5], &opts).is_err());
    }

    #[test]
    fn analyze_reports_pipeline() {
        let pts: Vec<(f64, f64)> = (0..60)
            .map(|k| (1e-4 * (k as f64 * 0.7).sin(), k as f64 * 1e-3))
            .collect();
        let a = analyze(&track(&pts), &AnalysisOptions::default()).unwrap();
        assert_eq!(
            a.metrics.pipeline,
            ["raw", "equalized", "hampel", "metrics"]
        );
        assert_eq!(a.equalized.stage, Stage::Equalized);
        assert_eq!(a.filtered.len(), a.equalized.len());
        assert!(a.metrics.rms_angle_deg <= a.raw_metrics.rms_angle_deg);
    }
}
