use std::f64::consts::{FRAC_PI_2, PI};

use magcoat_core::control::{Pose2, StepperModel};
use magcoat_core::dynamics::{CapsuleState, TorqueLaw, DEFAULT_DT};
use magcoat_core::environment::{
    load_torque, protrusion_barrier, slip_check, traction_required, Preset, Surface,
};
use magcoat_core::field::ActuatorMagnet;
use magcoat_core::geometry::{BodyProperties, CoatGeometry, Material};
use magcoat_core::sensing::{
    calibrate, default_fiducials, fit_calibration, observe, observe_track, reconstruct_pose,
    Affine2, CalibrationModel, CameraModel, MarkerPixels, PlanarTransform,
};
use magcoat_core::simulation::{roll_schedule, simulate, SimulationSetup, Thresholds};
use magcoat_core::{Error, GRAVITY};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// 6.6 g body used by the load-torque examples.
fn heavy_body() -> BodyProperties {
    BodyProperties::new(6.6e-3, 3.74e-7, 2.06e-7, 7.5e-3, 25e-3).unwrap()
}

fn coat_body() -> BodyProperties {
    BodyProperties::for_coat(&CoatGeometry::reference(), &Material::default(), 0.0).unwrap()
}

fn roll_setup(preset: Preset, seconds: f64) -> SimulationSetup {
    SimulationSetup {
        body: coat_body(),
        net_moment: 0.0492,
        actuator: ActuatorMagnet::uniform(0.0308, FRAC_PI_2, 0.0).unwrap(),
        surface: preset.surface(),
        schedule: roll_schedule(FRAC_PI_2, &StepperModel::roll_default(), seconds, false),
        start: Pose2 {
            x: 0.0,
            y: -0.032,
            psi: FRAC_PI_2,
        },
        duration: seconds,
        dt: DEFAULT_DT,
        damping: None,
        torque_law: TorqueLaw::Sine,
        effective_rolling_radius: None,
        thresholds: Thresholds::default(),
        seed: 1,
        record_every: 5,
    }
}

#[test]
fn flat_surface_at_rest_has_no_load() {
    let c = load_torque(
        &Preset::SmoothPla.surface(),
        &CapsuleState::default(),
        &heavy_body(),
    )
    .unwrap();
    assert_eq!(c.tau_load, 0.0);
    assert_eq!(c.on_protrusion, None);
    assert!(!c.slip);
}

#[test]
fn incline_gravity_term() {
    let s = Preset::SiliconeSlope.surface();
    let state = CapsuleState::at(0.0, 0.0, s.uphill_heading);
    let c = load_torque(&s, &state, &heavy_body()).unwrap();
    assert!(
        (c.tau_load - 6.34e-5).abs() < 0.02 * 6.34e-5,
        "{}",
        c.tau_load
    );
    // perpendicular to the fall line the slope vanishes
    let across = load_torque(
        &s,
        &CapsuleState::at(0.0, 0.0, s.uphill_heading + FRAC_PI_2),
        &heavy_body(),
    )
    .unwrap();
    assert!(across.tau_load.abs() < 1e-18);
}

#[test]
fn wet_reduces_friction() {
    let dry = Preset::SiliconeDryProtrusions.surface();
    let wet = Preset::SiliconeWetProtrusions.surface();
    assert!(wet.mu_effective() < dry.mu_static);
    assert_eq!(dry.mu_effective(), dry.mu_static);
}

#[test]
fn out_of_extent_rejected() {
    let s = Surface::flat(0.3, [0.02, 0.02]);
    assert!(matches!(
        load_torque(&s, &CapsuleState::at(0.011, 0.0, 0.0), &heavy_body()),
        Err(Error::OutOfBounds { .. })
    ));
}

#[test]
fn barrier_examples() {
    let r = 7.5e-3;
    let m = 6.6e-3;
    assert!(protrusion_barrier(r, 1e-9, m).unwrap() < 1e-6);
    assert!((protrusion_barrier(r, r, m).unwrap() - m * GRAVITY * r).abs() < 1e-18);
    let h5 = protrusion_barrier(r, 5e-3, m).unwrap();
    assert!((h5 - 4.58e-4).abs() < 0.02 * 4.58e-4, "{h5}");
    assert!(matches!(
        protrusion_barrier(r, 2.0 * r, m),
        Err(Error::Untraversable { .. })
    ));
}

#[test]
fn slip_threshold_crossing() {
    assert!(!slip_check(0.0, 0.36, 0.05));
    let mu_n = 0.36 * 0.05;
    assert!(slip_check(1.001 * mu_n, 0.36, 0.05));
    assert!(!slip_check(mu_n, 0.36, 0.05));
    assert_eq!(traction_required(-2e-4, 7.5e-3), 2e-4 / 7.5e-3);
}

#[test]
fn only_wet_folds_slip() {
    let wet = simulate(&roll_setup(Preset::SiliconeWetProtrusions, 8.0)).unwrap();
    let dry = simulate(&roll_setup(Preset::SiliconeDryProtrusions, 8.0)).unwrap();
    assert!(wet.slip_events >= 1, "wet slips: {}", wet.slip_events);
    assert_eq!(dry.slip_events, 0);
    assert!(
        wet.net_displacement() > 0.03,
        "stalled at {}",
        wet.net_displacement()
    );
}

fn grid() -> Vec<[f64; 2]> {
    let mut g = Vec::new();
    for i in 0..4 {
        for j in 0..3 {
            g.push([100.0 * i as f64, 80.0 * j as f64]);
        }
    }
    g
}

#[test]
fn identity_calibration() {
    let pts = grid();
    let fit = fit_calibration(&pts, &pts).unwrap();
    let PlanarTransform::Affine(a) = fit.transform_est else {
        panic!()
    };
    for (r, row) in a.matrix.iter().enumerate() {
        for (c, v) in row.iter().enumerate() {
            assert!((v - if r == c { 1.0 } else { 0.0 }).abs() < 1e-12);
        }
    }
    assert!(a.offset.iter().all(|o| o.abs() < 1e-9));
    assert!(fit.residual_rms < 1e-9);
}

#[test]
fn translation_recovered() {
    let pixel = grid();
    let world: Vec<_> = pixel.iter().map(|p| [p[0] + 5.0, p[1] - 3.0]).collect();
    let fit = fit_calibration(&pixel, &world).unwrap();
    let PlanarTransform::Affine(a) = fit.transform_est else {
        panic!()
    };
    assert!((a.offset[0] - 5.0).abs() < 1e-9 && (a.offset[1] + 3.0).abs() < 1e-9);
    assert!(fit.residual_rms < 1e-9);
}

#[test]
fn degenerate_fiducials() {
    let line: Vec<_> = (0..5).map(|i| [i as f64, 2.0 * i as f64]).collect();
    assert!(matches!(
        fit_calibration(&line, &line),
        Err(Error::Degenerate(_))
    ));
    let two = [[0.0, 0.0], [1.0, 0.0]];
    assert!(matches!(
        fit_calibration(&two, &two),
        Err(Error::Degenerate(_))
    ));
}

fn exact_fit(camera: &CameraModel) -> magcoat_core::sensing::CalibrationFit {
    let quiet = CameraModel {
        pixel_noise_sigma: 0.0,
        ..*camera
    };
    calibrate(
        &quiet,
        &default_fiducials(),
        CalibrationModel::Affine,
        &mut ChaCha8Rng::seed_from_u64(0),
    )
    .unwrap()
}

#[test]
fn markers_on_y_axis() {
    let camera = CameraModel::default();
    let fit = exact_fit(&camera);
    let m = MarkerPixels {
        red: camera.transform_true.apply([0.0, 5e-3]),
        blue: camera.transform_true.apply([0.0, -5e-3]),
    };
    let pose = reconstruct_pose(&m, &fit, 0.0).unwrap();
    assert!(pose.center[0].abs() < 1e-12 && pose.center[1].abs() < 1e-12);
    assert!((pose.heading - FRAC_PI_2).abs() < 1e-12);
    let swapped = MarkerPixels {
        red: m.blue,
        blue: m.red,
    };
    let back = reconstruct_pose(&swapped, &fit, 0.0).unwrap();
    assert!((pose.heading - back.heading - PI).abs() < 1e-12);
    let same = MarkerPixels {
        red: m.red,
        blue: m.red,
    };
    assert!(matches!(
        reconstruct_pose(&same, &fit, 0.0),
        Err(Error::Degenerate(_))
    ));
}

#[test]
fn marker_outside_frame() {
    let camera = CameraModel::default();
    let far = CapsuleState::at(0.2, 0.0, 0.0);
    assert!(matches!(
        observe(&camera, &far, 0.012, 1),
        Err(Error::Visibility { .. })
    ));
}

#[test]
fn center_noise_level() {
    let camera = CameraModel::default();
    let fit = exact_fit(&camera);
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let truth = CapsuleState::at(0.004, -0.011, 0.7);
    let n = 10_000;
    let mut sq = [0.0f64; 2];
    for _ in 0..n {
        let m = magcoat_core::sensing::observe_with(&camera, &truth, 0.012, &mut rng).unwrap();
        let p = reconstruct_pose(&m, &fit, 0.0).unwrap();
        sq[0] += (p.center[0] - truth.x).powi(2);
        sq[1] += (p.center[1] - truth.y).powi(2);
    }
    // averaging two markers halves the variance per axis
    let expected = 0.1 / 2f64.sqrt();
    for s in sq {
        let rms_mm = (s / n as f64).sqrt() * 1e3;
        assert!((rms_mm - expected).abs() < 0.1 * expected, "{rms_mm}");
    }
}

#[test]
fn calibration_residual_over_seeds() {
    let camera = CameraModel::default();
    for seed in 0..100 {
        let fit = calibrate(
            &camera,
            &default_fiducials(),
            CalibrationModel::Affine,
            &mut ChaCha8Rng::seed_from_u64(seed),
        )
        .unwrap();
        assert!(fit.residual_rms <= 0.2, "seed {seed}: {}", fit.residual_rms);
    }
}

#[test]
fn same_seed_same_pixels() {
    let camera = CameraModel::default();
    let s = CapsuleState::at(0.01, 0.02, 1.0);
    assert_eq!(
        observe(&camera, &s, 0.012, 5).unwrap(),
        observe(&camera, &s, 0.012, 5).unwrap()
    );
    assert_ne!(
        observe(&camera, &s, 0.012, 5).unwrap(),
        observe(&camera, &s, 0.012, 6).unwrap()
    );
}

#[test]
fn noiseless_track_round_trip() {
    let run = simulate(&roll_setup(Preset::SmoothPla, 3.0)).unwrap();
    let camera = CameraModel {
        pixel_noise_sigma: 0.0,
        transform_true: Affine2 {
            matrix: [[9.0e3, 1.5e3], [-2.0e3, -1.1e4]],
            offset: [950.0, 560.0],
        },
        ..CameraModel::default()
    };
    let fit = exact_fit(&camera);
    let obs = observe_track(
        &camera,
        &fit,
        &run.states,
        0.012,
        &mut ChaCha8Rng::seed_from_u64(3),
    )
    .unwrap();
    assert_eq!(obs.len(), 91);
    for o in &obs {
        let s = run.states.iter().find(|s| s.t == o.t).unwrap();
        assert!((o.center[0] - s.x).abs() < 1e-9 && (o.center[1] - s.y).abs() < 1e-9);
        let dpsi = (o.heading - s.psi).sin().abs();
        assert!(dpsi < 1e-9);
    }
}
