use std::path::Path;
use std::process::{Command, Output};

use magcoat::config::ScenarioConfig;
use magcoat::io::verify_manifest;

fn magcoat(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_magcoat"))
        .args(args)
        .env_remove(magcoat::config::OUT_ENV)
        .current_dir(out)
        .output()
        .unwrap()
}

fn write_config(dir: &Path, cfg: &ScenarioConfig) -> String {
    let path = dir.join("cfg.json");
    std::fs::write(&path, cfg.to_json().unwrap()).unwrap();
    path.to_str().unwrap().to_string()
}

fn quick() -> ScenarioConfig {
    let mut cfg = ScenarioConfig {
        motion: magcoat::Motion::Roll {
            heading_deg: 90.0,
            duration_s: 3.0,
        },
        ..ScenarioConfig::default()
    };
    cfg.field_study.resolution = 15;
    cfg
}

#[test]
fn sim_then_report() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &quick());
    let o = magcoat(
        &[
            "sim",
            "--config",
            &cfg,
            "--out",
            "runs",
            "--preset",
            "smooth_pla",
            "--preset",
            "silicone_dry_protrusions",
        ],
        tmp.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let stdout = String::from_utf8(o.stdout).unwrap();
    assert!(stdout.contains("rms_angle_deg"));
    for id in ["smooth_pla", "silicone_dry_protrusions"] {
        assert!(verify_manifest(&tmp.path().join("runs").join(id))
            .unwrap()
            .is_empty());
    }
    let o = magcoat(
        &[
            "report",
            "--csv",
            "runs/smooth_pla",
            "runs/silicone_dry_protrusions",
        ],
        tmp.path(),
    );
    assert!(o.status.success());
    let csv = String::from_utf8(o.stdout).unwrap();
    let lines: Vec<_> = csv.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[1].contains("smooth_pla") && lines[2].contains("silicone_dry_protrusions"));
}

#[test]
fn default_output_root_is_out() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &quick());
    let o = magcoat(
        &["sim", "--config", &cfg, "--noiseless", "--seed", "4"],
        tmp.path(),
    );
    assert!(o.status.success());
    let written = ScenarioConfig::load(&tmp.path().join("out/scenario/config.json")).unwrap();
    assert!(written.noiseless);
    assert_eq!(written.seed, 4);
}

#[test]
fn field_plan_and_analyze() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &quick());
    let o = magcoat(
        &["field", "--config", &cfg, "--study", "bar_snns"],
        tmp.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("ratio_dominant_over_weaker"));
    assert!(tmp
        .path()
        .join("out/scenario/bar_snns/field_xz.csv")
        .exists());

    let o = magcoat(
        &[
            "plan", "--config", &cfg, "--target", "0,30", "--target", "20,30",
        ],
        tmp.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(tmp.path().join("out/scenario/plan/schedule.csv").exists());

    magcoat(&["sim", "--config", &cfg], tmp.path());
    let track = tmp.path().join("out/scenario/sensed_track.csv");
    let o = magcoat(
        &[
            "analyze",
            "--config",
            &cfg,
            "--id",
            "again",
            track.to_str().unwrap(),
        ],
        tmp.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let again: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let first: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(tmp.path().join("out/scenario/metrics.json")).unwrap(),
    )
    .unwrap();
    // the CSV round trip keeps nine significant digits
    let (a, b) = (
        again["rms_angle_deg"].as_f64().unwrap(),
        first["rms_angle_deg"].as_f64().unwrap(),
    );
    assert!((a - b).abs() < 1e-5 * b, "{a} vs {b}");
    assert_eq!(again["scenario_id"], "again");
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let code = |args: &[&str]| magcoat(args, tmp.path()).status.code().unwrap();

    std::fs::write(tmp.path().join("broken.json"), "{ \"seed\": \"one\" }").unwrap();
    assert_eq!(code(&["sim", "--config", "broken.json"]), 2);
    assert_eq!(code(&["sim", "--config", "missing.json"]), 2);
    assert_eq!(code(&["sim", "--preset", "ice_rink"]), 2);
    assert_eq!(code(&["report"]), 2);
    assert_eq!(code(&["report", "nowhere"]), 2);

    let coarse = ScenarioConfig {
        dt: 0.05,
        ..quick()
    };
    let cfg = write_config(tmp.path(), &coarse);
    let o = magcoat(&["sim", "--config", &cfg], tmp.path());
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("numerical"));
}
