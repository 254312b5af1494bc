use std::f64::consts::{FRAC_PI_2, PI};

use magcoat_core::analysis::{
    equalize_density, hampel_filter, hampel_pass, rms_angle, rms_x, HampelOptions, Stage,
    TrackRecord, TrackSample, MAD_SCALE,
};
use magcoat_core::control::{
    constant_rate_schedule, plan_to_schedule, plan_to_target, Pose2, StepperModel,
};
use magcoat_core::dynamics::{
    step, Axis, CapsuleState, Command, DynamicsParams, ExternalTorques, TorqueLaw,
};
use magcoat_core::environment::{
    load_torque, protrusion_barrier, slip_check, Surface, SurfaceKind,
};
use magcoat_core::field::{dipole_field, torque_on, MagnetizedBody};
use magcoat_core::geometry::{
    realize_bar, realize_pattern, BarGeometry, BodyProperties, BodySpec, MagnetizationDirection,
    Polarity, PolePattern,
};
use magcoat_core::sensing::{
    calibrate, default_fiducials, observe, reconstruct_pose, Affine2, CalibrationModel, CameraModel,
};
use magcoat_core::Vec3;
use nalgebra::{Isometry3, Translation3, UnitQuaternion};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn unit(theta: f64, phi: f64) -> [f64; 3] {
    [
        theta.sin() * phi.cos(),
        theta.sin() * phi.sin(),
        theta.cos(),
    ]
}

fn uniform_bar(axis: [f64; 3], cell: f64) -> MagnetizedBody {
    let p = PolePattern::uniform(Polarity::N, MagnetizationDirection::Axis(axis), 80e3).unwrap();
    realize_bar(&BarGeometry::reference(), &p, cell).unwrap()
}

fn vec3() -> impl Strategy<Value = Vec3> {
    (-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64).prop_map(|(a, b, c)| Vec3::new(a, b, c))
}

fn track_from(points: &[(f64, f64)]) -> TrackRecord {
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
    TrackRecord::new("p", Stage::Raw, samples).unwrap()
}

fn wandering_track() -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((-2e-3..2e-3f64, 0.2e-3..3e-3f64), 3..40).prop_map(|steps| {
        let (mut x, mut y) = (0.0, 0.0);
        let mut pts = vec![(0.0, 0.0)];
        for (dx, dy) in steps {
            x += dx;
            y += dy;
            pts.push((x, y));
        }
        pts
    })
}

/// Single Hampel sweep written directly from the definition.
fn hampel_oracle(s: &[f64], w: usize, n_sigma: f64, floor: f64) -> Vec<usize> {
    let med = |v: &mut Vec<f64>| {
        v.sort_by(f64::total_cmp);
        let n = v.len();
        if n % 2 == 1 {
            v[n / 2]
        } else {
            0.5 * (v[n / 2 - 1] + v[n / 2])
        }
    };
    let half = w / 2;
    let mut out = Vec::new();
    for i in 0..s.len() {
        let lo = if i < half {
            0
        } else if i + half >= s.len() {
            s.len() - w
        } else {
            i - half
        };
        let mut win: Vec<f64> = s[lo..lo + w].to_vec();
        let m = med(&mut win);
        let mut dev: Vec<f64> = s[lo..lo + w].iter().map(|v| (v - m).abs()).collect();
        let mad = med(&mut dev);
        if (s[i] - m).abs() > (n_sigma * MAD_SCALE * mad).max(floor) {
            out.push(i);
        }
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn superposition_is_exact(shift in vec3(), p in vec3(), theta in 0.0..PI, phi in 0.0..2.0 * PI) {
        let a = uniform_bar(unit(theta, phi), 1.0);
        let b = uniform_bar(unit(phi / 2.0, theta), 1.0)
            .with_pose(Isometry3::from_parts(Translation3::from(shift * 0.03), UnitQuaternion::identity()));
        let point = p * 0.1 + Vec3::new(0.0, 0.0, 0.12);
        let both = a.merged(&b).unwrap().field_at(&point).unwrap();
        let sum = a.field_at(&point).unwrap() + b.field_at(&point).unwrap();
        prop_assert!((both - sum).norm() <= 1e-12 * sum.norm().max(1e-30));
    }

    #[test]
    fn far_field_is_a_dipole(theta in 0.0..PI, phi in 0.0..2.0 * PI, dt in 0.0..PI, dp in 0.0..2.0 * PI, k in 10.0..30.0f64) {
        let body = uniform_bar(unit(theta, phi), 1.0);
        let r = Vec3::from(unit(dt, dp)) * (k * 20e-3);
        let b = body.field_at(&r).unwrap();
        let d = dipole_field(&body.net_moment(), &r).unwrap();
        prop_assert!((b - d).norm() <= 0.05 * d.norm(), "{} vs {}", b.norm(), d.norm());
    }

    #[test]
    fn torque_bilinear_and_antisymmetric(m1 in vec3(), m2 in vec3(), b in vec3(), s in -3.0..3.0f64) {
        let t = torque_on(&(m1 * s + m2), &b);
        let expect = torque_on(&m1, &b) * s + torque_on(&m2, &b);
        prop_assert!((t - expect).norm() <= 1e-12 * (1.0 + expect.norm()));
        prop_assert!((torque_on(&m1, &b) + torque_on(&b, &m1)).norm() <= 1e-15);
    }

    #[test]
    fn flipped_pattern_negates_moments(code in "[NS]{2,6}", theta in 0.0..PI, phi in 0.0..2.0 * PI) {
        let p = PolePattern::from_code(&code, MagnetizationDirection::Axis(unit(theta, phi)), 50e3).unwrap();
        let bar = BarGeometry::reference();
        let a = realize_bar(&bar, &p, 1.0).unwrap();
        let b = realize_bar(&bar, &p.flipped(), 1.0).unwrap();
        for (x, y) in a.cells().iter().zip(b.cells()) {
            prop_assert_eq!(x.moment, -y.moment);
            prop_assert_eq!(x.center, y.center);
        }
    }

    #[test]
    fn damped_energy_never_grows(
        mb in 1e-4..3e-3f64, zeta in 0.05..2.0f64, e0 in -1.0..1.0f64, w0 in -20.0..20.0f64,
    ) {
        let mut p = DynamicsParams::reference(1.0, mb);
        p.torque_law = TorqueLaw::Linearized;
        p.c_psi = magcoat_core::dynamics::critical_fraction_damping(zeta, p.i_psi, mb);
        let cmd = Command { phi: 0.3, gamma: 0.0 };
        let energy = |s: &CapsuleState| 0.5 * p.i_psi * s.psi_dot.powi(2) + 0.5 * mb * (cmd.phi - s.psi).powi(2);
        let mut s = CapsuleState { psi: 0.3 + e0, psi_dot: w0, ..CapsuleState::default() };
        for _ in 0..400 {
            let n = step(&s, &p, cmd, ExternalTorques::default(), 2e-4).unwrap();
            prop_assert!(energy(&n) <= energy(&s) * (1.0 + 1e-9));
            s = n;
        }
    }

    #[test]
    fn held_dof_stays_still(ratio in 0.0..0.99f64, sine in any::<bool>()) {
        let mut p = DynamicsParams::reference(0.05, 0.0308);
        p.torque_law = if sine { TorqueLaw::Sine } else { TorqueLaw::Linearized };
        p.tau_s_roll = 2e-4;
        let gamma = (ratio * p.tau_s_roll / p.mb_roll).min(1.0);
        let gamma = if sine { gamma.asin() } else { gamma };
        let mut s = CapsuleState::default();
        for _ in 0..200 {
            s = step(&s, &p, Command { phi: 0.0, gamma }, ExternalTorques::default(), 2e-4).unwrap();
            prop_assert_eq!(s.alpha_dot, 0.0);
            prop_assert!(s.stuck_roll);
        }
    }

    #[test]
    fn quantization_within_one_step(duration in 0.0..12.0f64, t in 0.0..12.0f64, roll in any::<bool>()) {
        let (motor, axis) = if roll {
            (StepperModel::roll_default(), Axis::Roll)
        } else {
            (StepperModel::yaw_default(), Axis::Yaw)
        };
        let q = constant_rate_schedule(&motor, axis, duration, true).unwrap();
        let c = constant_rate_schedule(&motor, axis, duration, false).unwrap();
        let pick = |s: Command| if roll { s.gamma } else { s.phi };
        prop_assert!((pick(q.command_at(t)) - pick(c.command_at(t))).abs() <= motor.step_angle * (1.0 + 1e-9));
        let angle = |p: &magcoat_core::control::SchedulePoint| if roll { p.gamma } else { p.phi };
        for w in q.samples.windows(2) {
            prop_assert!(w[1].t > w[0].t);
            prop_assert!(angle(&w[1]) >= angle(&w[0]));
        }
    }

    #[test]
    fn open_loop_plan_lands_on_target(tx in -0.03..0.03f64, ty in -0.03..0.03f64, psi in -PI..PI, quantize in any::<bool>()) {
        let r = 7.5e-3;
        let plan = plan_to_target(Pose2 { x: 0.0, y: 0.0, psi }, (tx, ty), r).unwrap();
        let roll = StepperModel::roll_default();
        let s = plan_to_schedule(&plan, &StepperModel::yaw_default(), &roll, quantize).unwrap();
        let (mut x, mut y) = (0.0, 0.0);
        for w in s.samples.windows(2) {
            let ds = r * (w[1].gamma - w[0].gamma);
            x += ds * w[0].phi.cos();
            y += ds * w[0].phi.sin();
        }
        prop_assert!((x - tx).hypot(y - ty) <= roll.step_angle * r + 1e-12);
    }

    #[test]
    fn gravity_term_is_odd(angle in 0.0..30.0f64, psi in -PI..PI) {
        let body = BodyProperties::new(6.6e-3, 3.74e-7, 2.06e-7, 7.5e-3, 25e-3).unwrap();
        let surface = |a: f64| Surface { kind: SurfaceKind::Incline, incline_angle: a, ..Surface::flat(0.9, [0.1, 0.1]) };
        let s = CapsuleState::at(0.0, 0.0, psi);
        let up = load_torque(&surface(angle), &s, &body).unwrap().tau_load;
        let down = load_torque(&surface(-angle), &s, &body).unwrap().tau_load;
        prop_assert!((up + down).abs() <= 1e-18);
        prop_assert_eq!(load_torque(&surface(0.0), &s, &body).unwrap().tau_load, 0.0);
    }

    #[test]
    fn barrier_increases_up_to_radius(h1 in 1e-6..7.5e-3f64, h2 in 1e-6..7.5e-3f64) {
        let (lo, hi) = if h1 < h2 { (h1, h2) } else { (h2, h1) };
        prop_assume!(hi - lo > 1e-9);
        prop_assert!(protrusion_barrier(7.5e-3, lo, 6.6e-3).unwrap() < protrusion_barrier(7.5e-3, hi, 6.6e-3).unwrap());
    }

    #[test]
    fn more_friction_never_slips_more(f in 0.0..1.0f64, mu in 0.0..1.0f64, extra in 0.0..1.0f64, n in 0.0..0.2f64) {
        if !slip_check(f, mu, n) {
            prop_assert!(!slip_check(f, mu + extra, n));
        }
    }

    #[test]
    fn noiseless_round_trip(x in -0.04..0.04f64, y in -0.03..0.03f64, psi in -PI..PI, a in 0.7..1.3f64, sh in -0.2..0.2f64, scale in 0.5..2.0f64) {
        let camera = CameraModel {
            pixel_noise_sigma: 0.0,
            transform_true: Affine2 { matrix: [[8e3 * a, 8e3 * sh], [-1e3 * sh, -8e3 / a]], offset: [960.0, 540.0] },
            ..CameraModel::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let fit = calibrate(&camera, &default_fiducials(), CalibrationModel::Affine, &mut rng).unwrap();
        let state = CapsuleState::at(x, y, psi);
        let m = observe(&camera, &state, 0.012, 1).unwrap();
        let pose = reconstruct_pose(&m, &fit, 0.0).unwrap();
        prop_assert!((pose.center[0] - x).abs() < 1e-9 && (pose.center[1] - y).abs() < 1e-9);
        prop_assert!((pose.heading - psi).sin().abs() < 1e-9 && (pose.heading - psi).cos() > 0.0);

        // uniformly rescaled pixel frame, recalibrated
        let mut t = camera.transform_true;
        for row in &mut t.matrix { for v in row.iter_mut() { *v *= scale; } }
        t.offset = [2000.0, 1500.0];
        let scaled = CameraModel { transform_true: t, resolution: [4000, 3000], ..camera };
        let fit2 = calibrate(&scaled, &default_fiducials(), CalibrationModel::Affine, &mut rng).unwrap();
        let pose2 = reconstruct_pose(&observe(&scaled, &state, 0.012, 1).unwrap(), &fit2, 0.0).unwrap();
        prop_assert!((pose2.heading - pose.heading).sin().abs() < 1e-9);
    }

    #[test]
    fn equalized_spacing_is_uniform(pts in wandering_track(), spacing in 0.3..2.0f64) {
        let e = equalize_density(&track_from(&pts), spacing).unwrap();
        let h = spacing * 1e-3;
        let n = e.samples.len();
        // on a straight track arc length is the y coordinate
        let straight: Vec<_> = pts.iter().map(|&(_, y)| (0.0, y)).collect();
        let s = equalize_density(&track_from(&straight), spacing).unwrap();
        for w in s.samples.windows(2).take(s.samples.len().saturating_sub(2)) {
            prop_assert!(((w[1].y - w[0].y) - h).abs() <= 1e-9 * h);
        }
        prop_assert_eq!(e.samples[0], track_from(&pts).samples[0]);
        prop_assert_eq!(e.samples[n - 1], *track_from(&pts).samples.last().unwrap());
    }

    #[test]
    fn hampel_pass_matches_definition(s in prop::collection::vec(-10.0..10.0f64, 11..60), spikes in prop::collection::vec((0usize..60, -200.0..200.0f64), 0..5), w in prop::sample::select(vec![3usize, 5, 11])) {
        let mut s = s;
        for (i, v) in spikes {
            let n = s.len();
            s[i % n] = v;
        }
        let opts = HampelOptions { window: w, ..HampelOptions::default() };
        let out = hampel_pass(&s, &opts).unwrap();
        let expected = hampel_oracle(&s, w, 1.0, opts.mad_floor);
        prop_assert_eq!(&out.replaced, &expected);
        for (i, (&got, &orig)) in out.filtered.iter().zip(&s).enumerate() {
            if !expected.contains(&i) {
                prop_assert_eq!(got, orig);
            }
        }
    }

    #[test]
    fn rms_x_invariances(pts in wandering_track(), dy in -0.1..0.1f64, k in -5.0..5.0f64) {
        let base = rms_x(&track_from(&pts)).unwrap();
        let shifted: Vec<_> = pts.iter().map(|&(x, y)| (x, y + dy)).collect();
        prop_assert!((rms_x(&track_from(&shifted)).unwrap() - base).abs() <= 1e-12 * (1.0 + base));
        let scaled: Vec<_> = pts.iter().map(|&(x, y)| (k * x, y)).collect();
        prop_assert!((rms_x(&track_from(&scaled)).unwrap() - k.abs() * base).abs() <= 1e-9 * (1.0 + base));
    }

    #[test]
    fn rms_angle_translation_invariant(pts in wandering_track(), dx in -0.05..0.05f64, dy in -0.05..0.05f64) {
        let opts = HampelOptions::default();
        let a = rms_angle(&track_from(&pts), Some(&opts)).unwrap();
        let moved: Vec<_> = pts.iter().map(|&(x, y)| (x + dx, y + dy)).collect();
        let b = rms_angle(&track_from(&moved), Some(&opts)).unwrap();
        prop_assert!((a.rms_angle - b.rms_angle).abs() <= 1e-6 * (1.0 + a.rms_angle));
    }
}

#[test]
fn cell_volume_converges() {
    for spec in [
        BodySpec::reference_coat(100e3),
        BodySpec::reference_bar(100e3),
    ] {
        let exact = spec.analytic_volume();
        for h in [1.0, 0.5, 0.25] {
            // cells tile the analytic body, so the sum is exact at every size
            let v = realize_pattern(&spec, h).unwrap().volume();
            assert!((v - exact).abs() <= 1e-9 * exact, "h = {h}: {v} vs {exact}");
        }
    }
}

#[test]
fn grid_refinement_is_stable() {
    use magcoat_core::field::{field_map, MapSpec, Plane};
    let body = realize_pattern(&BodySpec::reference_bar(100e3), 0.5).unwrap();
    let spec = |n| MapSpec {
        plane: Plane::Xz,
        offset: 0.0,
        extent: 0.1,
        resolution: n,
    };
    let (coarse, fine) = (
        field_map(&body, &spec(101)).unwrap(),
        field_map(&body, &spec(201)).unwrap(),
    );
    for row in 0..101 {
        for col in 0..101 {
            assert_eq!(coarse.value(row, col), fine.value(2 * row, 2 * col));
        }
    }
    // field scale at each radius: RMS |B| over 1 mm rings of the fine lattice
    let mut rings = vec![(0.0, 0usize); 80];
    for (p, v) in fine.points.iter().zip(&fine.values) {
        let k = (p.x.hypot(p.z) * 1e3) as usize;
        rings[k].0 += v.norm_squared();
        rings[k].1 += 1;
    }
    let margin = 0.02;
    for (i, (p, v)) in fine.points.iter().zip(&fine.values).enumerate() {
        let r = p.x.hypot(p.z);
        if (p.x.abs() < 0.01 + margin && p.z.abs() < 0.001 + margin) || r > 0.05 {
            continue;
        }
        let (sum, n) = rings[(r * 1e3) as usize];
        let scale = (sum / n as f64).sqrt();
        let c = coarse.interpolate(p.x, p.z).unwrap();
        assert!((c - v).norm() <= 0.01 * scale, "sample {i} at r = {r}");
    }
}

#[test]
fn hampel_idempotent_over_seeds() {
    let opts = HampelOptions::default();
    for seed in 0..1000u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.random_range(11..80);
        let s: Vec<f64> = (0..n)
            .map(|_| {
                let v: f64 = rng.random_range(-1.0..1.0);
                if rng.random_bool(0.1) {
                    v * 50.0
                } else {
                    v
                }
            })
            .collect();
        let once = hampel_filter(&s, &opts).unwrap();
        let twice = hampel_filter(&once.filtered, &opts).unwrap();
        assert!(twice.replaced.is_empty(), "seed {seed}");
    }
}

#[test]
fn heading_offsets_keep_plans_consistent() {
    // plan from a heading already on the target bearing needs no yaw motion
    let plan = plan_to_target(
        Pose2 {
            x: 0.0,
            y: 0.0,
            psi: FRAC_PI_2,
        },
        (0.0, 0.02),
        7.5e-3,
    )
    .unwrap();
    let s = plan_to_schedule(
        &plan,
        &StepperModel::yaw_default(),
        &StepperModel::roll_default(),
        true,
    )
    .unwrap();
    assert!(s.samples.iter().all(|p| p.phi == FRAC_PI_2));
}
