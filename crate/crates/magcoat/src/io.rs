//! CSV series, JSON documents and the hashed manifest of a run directory.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use magcoat_core::analysis::{Stage, TrackRecord, TrackSample};
use magcoat_core::control::ActuationSchedule;
use magcoat_core::field::FieldMap;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Scientific notation with 9 significant digits.
fn num(v: f64) -> String {
    format!("{v:.8e}")
}

fn csv_text(header: &[&str], rows: impl Iterator<Item = Vec<f64>>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io_err = |e: csv::Error| Error::io("<csv>", std::io::Error::other(e));
    w.write_record(header).map_err(io_err)?;
    for row in rows {
        w.write_record(row.into_iter().map(num)).map_err(io_err)?;
    }
    w.into_inner()
        .map_err(|e| Error::io("<csv>", std::io::Error::other(e.to_string())))
}

pub const TRACK_HEADER: [&str; 4] = ["t_s", "x_m", "y_m", "heading_rad"];

pub fn track_csv(track: &TrackRecord) -> Result<Vec<u8>> {
    csv_text(
        &TRACK_HEADER,
        track.samples.iter().map(|s| vec![s.t, s.x, s.y, s.heading]),
    )
}

pub fn field_map_csv(map: &FieldMap) -> Result<Vec<u8>> {
    csv_text(
        &["x_m", "y_m", "z_m", "Bx_T", "By_T", "Bz_T"],
        map.points
            .iter()
            .zip(&map.values)
            .map(|(p, b)| vec![p.x, p.y, p.z, b.x, b.y, b.z]),
    )
}

pub fn schedule_csv(schedule: &ActuationSchedule) -> Result<Vec<u8>> {
    csv_text(
        &["t_s", "phi_rad", "gamma_rad"],
        schedule.samples.iter().map(|p| vec![p.t, p.phi, p.gamma]),
    )
}

pub fn series_csv(header: &[&str], rows: impl Iterator<Item = Vec<f64>>) -> Result<Vec<u8>> {
    csv_text(header, rows)
}

/// Read a `t_s,x_m,y_m,heading_rad` track.
pub fn read_track(path: &Path, scenario_id: &str) -> Result<TrackRecord> {
    let mut r =
        csv::Reader::from_path(path).map_err(|e| Error::io(path, std::io::Error::other(e)))?;
    let headers = r
        .headers()
        .map_err(|e| Error::io(path, std::io::Error::other(e)))?
        .clone();
    if headers.iter().collect::<Vec<_>>() != TRACK_HEADER {
        return Err(Error::config(
            path.display().to_string(),
            format!("expected header {}", TRACK_HEADER.join(",")),
        ));
    }
    let mut samples = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| Error::io(path, std::io::Error::other(e)))?;
        let vals = rec
            .iter()
            .map(|f| f.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| {
                Error::config(format!("{}:{}", path.display(), line + 2), e.to_string())
            })?;
        if vals.len() != 4 {
            return Err(Error::config(
                format!("{}:{}", path.display(), line + 2),
                "expected 4 columns",
            ));
        }
        samples.push(TrackSample {
            t: vals[0],
            x: vals[1],
            y: vals[2],
            heading: vals[3],
        });
    }
    TrackRecord::new(scenario_id, Stage::Raw, samples)
        .map_err(|e| Error::config(path.display().to_string(), e.to_string()))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileEntry {
    /// Relative to the run directory.
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub core_version: String,
    pub command: String,
    pub config: serde_json::Value,
    pub files: Vec<FileEntry>,
}

pub const MANIFEST_NAME: &str = "manifest.json";

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Collects files for one run directory and records their hashes.
#[derive(Debug)]
pub struct ArtifactWriter {
    dir: PathBuf,
    files: Vec<FileEntry>,
}

impl ArtifactWriter {
    pub fn create(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf> {
        let path = self.dir.join(name);
        fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
        self.files.retain(|f| f.path != name);
        self.files.push(FileEntry {
            path: name.to_string(),
            sha256: sha256_hex(bytes),
            bytes: bytes.len() as u64,
        });
        Ok(path)
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<PathBuf> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    pub fn finish(self, command: &str, config: serde_json::Value) -> Result<PathBuf> {
        let manifest = Manifest {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            core_version: magcoat_core::VERSION.into(),
            command: command.into(),
            config,
            files: self.files,
        };
        let path = self.dir.join(MANIFEST_NAME);
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }
}

pub fn read_manifest(dir: &Path) -> Result<Manifest> {
    let path = dir.join(MANIFEST_NAME);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    Ok(serde_json::from_str(&text)?)
}

/// Names of manifest entries whose on-disk content no longer matches.
pub fn verify_manifest(dir: &Path) -> Result<Vec<String>> {
    let m = read_manifest(dir)?;
    let mut bad = Vec::new();
    for f in &m.files {
        match fs::read(dir.join(&f.path)) {
            Ok(bytes) if sha256_hex(&bytes) == f.sha256 => {}
            _ => bad.push(f.path.clone()),
        }
    }
    Ok(bad)
}

/// Plain-text key/value lines, used for human summaries.
pub fn summary_lines(pairs: &[(&str, String)]) -> String {
    let width = pairs.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
    let mut out = String::new();
    for (k, v) in pairs {
        let _ = writeln!(out, "{k:<width$}  {v}");
    }
    out
}
