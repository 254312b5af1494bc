use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use magcoat::config::{Motion, ScenarioConfig};
use magcoat::io::{self, ArtifactWriter};
use magcoat::{report, run_field_study, run_scenario, Error, Result, Study};
use magcoat_core::analysis::analyze;
use magcoat_core::environment::Preset;
use rayon::prelude::*;

#[derive(Parser)]
#[command(
    name = "magcoat",
    version,
    about = "Capsule-robot magnetostatics, rolling dynamics and trajectory metrics"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Scenario config (JSON).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output root; defaults to $MAGCOAT_OUT, then ./out.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Surface preset; repeat to run several scenarios.
    #[arg(long, value_parser = parse_preset)]
    preset: Vec<Preset>,
    #[arg(long)]
    quantize_steppers: bool,
    /// Disable camera noise.
    #[arg(long)]
    noiseless: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate, observe and analyse one or more scenarios.
    Sim {
        #[command(flatten)]
        common: Common,
        /// Write SVG plots next to the CSVs.
        #[arg(long)]
        plots: bool,
    },
    /// Magnetostatic field study.
    Field {
        #[command(flatten)]
        common: Common,
        /// bar_snns or capsule_coat; both when omitted.
        #[arg(long)]
        study: Vec<Study>,
    },
    /// Yaw-then-roll plan through targets given in mm as `x,y`.
    Plan {
        #[command(flatten)]
        common: Common,
        #[arg(long = "target", value_parser = parse_point, required = true)]
        targets: Vec<[f64; 2]>,
    },
    /// Run the metrics pipeline on an existing `t_s,x_m,y_m,heading_rad` track.
    Analyze {
        #[command(flatten)]
        common: Common,
        track: PathBuf,
        #[arg(long, default_value = "track")]
        id: String,
    },
    /// Cross-scenario table from run directories.
    Report {
        dirs: Vec<PathBuf>,
        /// Emit CSV instead of the text table.
        #[arg(long)]
        csv: bool,
    },
}

/// Write to stdout; a closed pipe (`magcoat report ... | head`) ends the process quietly.
fn emit_raw(text: &str) {
    use std::io::Write;
    let mut out = std::io::stdout().lock();
    if let Err(e) = out.write_all(text.as_bytes()).and_then(|()| out.flush()) {
        if e.kind() == std::io::ErrorKind::BrokenPipe {
            std::process::exit(0);
        }
        eprintln!("magcoat: stdout: {e}");
        std::process::exit(2);
    }
}

macro_rules! emit {
    ($($arg:tt)*) => {
        emit_raw(&format!("{}\n", format_args!($($arg)*)))
    };
}

fn parse_preset(s: &str) -> std::result::Result<Preset, String> {
    s.parse::<Preset>().map_err(|e| e.to_string())
}

fn parse_point(s: &str) -> std::result::Result<[f64; 2], String> {
    let (a, b) = s.split_once(',').ok_or("expected x,y")?;
    let p = |v: &str| v.trim().parse::<f64>().map_err(|e| e.to_string());
    Ok([p(a)? * 1e-3, p(b)? * 1e-3])
}

/// Config file (or defaults), then command-line overrides.
fn configs(c: &Common) -> Result<Vec<ScenarioConfig>> {
    let base = match &c.config {
        Some(p) => ScenarioConfig::load(p)?,
        None => ScenarioConfig::default(),
    };
    let apply = |mut cfg: ScenarioConfig| {
        if let Some(s) = c.seed {
            cfg.seed = s;
        }
        cfg.quantize_steppers |= c.quantize_steppers;
        cfg.noiseless |= c.noiseless;
        if c.out.is_some() {
            cfg.output_dir = c.out.clone();
        }
        cfg
    };
    if c.preset.is_empty() {
        return Ok(vec![apply(base)]);
    }
    Ok(c.preset
        .iter()
        .map(|&p| {
            apply(ScenarioConfig {
                scenario_id: p.as_str().into(),
                surface: magcoat::SurfaceChoice::Preset(p),
                ..base.clone()
            })
        })
        .collect())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Sim { common, plots } => {
            let cfgs = configs(&common)?;
            let runs = cfgs
                .par_iter()
                .map(|c| {
                    let c = ScenarioConfig {
                        plots: plots || c.plots,
                        ..c.clone()
                    };
                    run_scenario(&c, None)
                })
                .collect::<Vec<_>>();
            for r in runs {
                let a = r?;
                let s = &a.summary;
                let mut lines = vec![
                    ("scenario", s.scenario_id.clone()),
                    ("dir", a.dir.display().to_string()),
                    ("net_moment_Am2", format!("{:.6}", s.net_moment)),
                    (
                        "displacement_mm",
                        format!("{:.3}", s.net_displacement * 1e3),
                    ),
                    ("slip_events", s.slip_events.to_string()),
                    (
                        "calibration_residual_mm",
                        format!("{:.4}", s.calibration_residual),
                    ),
                ];
                match &a.report {
                    Some(m) => {
                        lines.push(("rms_x_mm", format!("{:.4}", m.rms_x_mm)));
                        lines.push(("rms_angle_deg", format!("{:.4}", m.rms_angle_deg)));
                    }
                    None => lines.push(("analysis", s.analysis_error.clone().unwrap_or_default())),
                }
                emit!("{}", io::summary_lines(&lines));
            }
        }
        Command::Field { common, study } => {
            let studies = if study.is_empty() {
                vec![Study::BarSnns, Study::CapsuleCoat]
            } else {
                study
            };
            for cfg in configs(&common)? {
                for &st in &studies {
                    let a = run_field_study(&cfg, st, None)?;
                    emit!("{}", serde_json::to_string_pretty(&a.summary)?);
                    emit!("written to {}", a.dir.display());
                }
            }
        }
        Command::Plan { common, targets } => {
            for mut cfg in configs(&common)? {
                cfg.motion = Motion::Waypoints {
                    targets: targets.clone(),
                };
                cfg.validate()?;
                let body = magcoat::scenario::body_properties(&cfg)?;
                let radius = cfg.effective_rolling_radius.unwrap_or(body.rolling_radius);
                let schedule = magcoat::scenario::build_schedule(&cfg, radius)?;
                let dir = cfg.run_dir(None).join("plan");
                let mut out = ArtifactWriter::create(&dir)?;
                out.write("schedule.csv", &io::schedule_csv(&schedule)?)?;
                out.finish("plan", serde_json::to_value(&cfg)?)?;
                emit!(
                    "{} commands over {:.3} s written to {}",
                    schedule.samples.len(),
                    schedule.end_time(),
                    dir.display()
                );
            }
        }
        Command::Analyze { common, track, id } => {
            let cfg = configs(&common)?.remove(0);
            let raw = io::read_track(&track, &id)?;
            let a = analyze(&raw, &cfg.analysis)?;
            let dir = cfg.run_dir(None).join("analysis").join(&id);
            let mut out = ArtifactWriter::create(&dir)?;
            out.write("equalized_track.csv", &io::track_csv(&a.equalized)?)?;
            out.write("filtered_track.csv", &io::track_csv(&a.filtered)?)?;
            out.write_json("metrics.json", &a.metrics)?;
            out.write_json("metrics_raw.json", &a.raw_metrics)?;
            out.finish("analyze", serde_json::to_value(cfg.analysis)?)?;
            emit!("{}", serde_json::to_string_pretty(&a.metrics)?);
        }
        Command::Report { dirs, csv } => {
            let table = report(&dirs)?;
            if csv {
                emit_raw(&table.to_csv());
            } else {
                emit_raw(&table.to_text());
            }
            if !table.is_complete() {
                return Err(Error::config("dirs", "some runs have no metrics"));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("magcoat: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
