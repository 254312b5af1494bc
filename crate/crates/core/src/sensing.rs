//! Synthetic overhead camera: marker projection, fiducial calibration and
//! pose reconstruction.
//!
//! The camera's 0.1 mm detection accuracy is modelled as isotropic Gaussian
//! pixel noise whose standard deviation, per image axis, equals the stated
//! millimeter figure converted to pixels.

use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use nalgebra::{DMatrix, Matrix2, Matrix3, Vector2, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dynamics::CapsuleState;
use crate::error::{invalid, Error, Result};

/// Six-parameter planar map `[u, v] = A·[x, y] + t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Affine2 {
    pub matrix: [[f64; 2]; 2],
    pub offset: [f64; 2],
}

impl Affine2 {
    pub const IDENTITY: Affine2 = Affine2 {
        matrix: [[1.0, 0.0], [0.0, 1.0]],
        offset: [0.0, 0.0],
    };

    fn mat(&self) -> Matrix2<f64> {
        let m = self.matrix;
        Matrix2::new(m[0][0], m[0][1], m[1][0], m[1][1])
    }

    pub fn apply(&self, p: [f64; 2]) -> [f64; 2] {
        let q = self.mat() * Vector2::from(p) + Vector2::from(self.offset);
        [q.x, q.y]
    }

    pub fn determinant(&self) -> f64 {
        self.mat().determinant()
    }

    pub fn inverse(&self) -> Result<Affine2> {
        let inv = self
            .mat()
            .try_inverse()
            .ok_or_else(|| Error::Degenerate("singular affine transform".into()))?;
        let t = -(inv * Vector2::from(self.offset));
        Ok(Affine2 {
            matrix: [[inv[(0, 0)], inv[(0, 1)]], [inv[(1, 0)], inv[(1, 1)]]],
            offset: [t.x, t.y],
        })
    }
}

/// Pixel → world mapping recovered by calibration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PlanarTransform {
    Affine(Affine2),
    /// Row-major 3×3 homography.
    Homography([[f64; 3]; 3]),
}

impl PlanarTransform {
    pub fn apply(&self, p: [f64; 2]) -> [f64; 2] {
        match self {
            PlanarTransform::Affine(a) => a.apply(p),
            PlanarTransform::Homography(h) => {
                let w = h[2][0] * p[0] + h[2][1] * p[1] + h[2][2];
                [
                    (h[0][0] * p[0] + h[0][1] * p[1] + h[0][2]) / w,
                    (h[1][0] * p[0] + h[1][1] * p[1] + h[1][2]) / w,
                ]
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CalibrationModel {
    #[default]
    Affine,
    Homography,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraModel {
    pub resolution: [u32; 2],
    /// Hz
    pub frame_rate: f64,
    /// Per-axis pixel noise expressed in world millimeters.
    pub pixel_noise_sigma: f64,
    /// World (m) → pixels.
    pub transform_true: Affine2,
}

impl Default for CameraModel {
    /// 1920×1080 at 30 Hz, 10 px/mm, origin at the image center, image v downward.
    fn default() -> Self {
        Self {
            resolution: [1920, 1080],
            frame_rate: 30.0,
            pixel_noise_sigma: 0.1,
            transform_true: Affine2 {
                matrix: [[1.0e4, 0.0], [0.0, -1.0e4]],
                offset: [960.0, 540.0],
            },
        }
    }
}

impl CameraModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.frame_rate > 0.0 && self.frame_rate.is_finite()) {
            return Err(invalid("CameraModel", "frame rate must be positive"));
        }
        if !(self.pixel_noise_sigma >= 0.0 && self.pixel_noise_sigma.is_finite()) {
            return Err(invalid("CameraModel", "pixel noise must be non-negative"));
        }
        if self.transform_true.determinant() == 0.0 {
            return Err(invalid(
                "CameraModel",
                "camera transform must be invertible",
            ));
        }
        Ok(())
    }

    /// Pixels per millimeter (geometric mean of the two axes).
    pub fn pixels_per_mm(&self) -> f64 {
        self.transform_true.determinant().abs().sqrt() * 1e-3
    }

    fn sigma_px(&self) -> f64 {
        self.pixel_noise_sigma * self.pixels_per_mm()
    }

    fn check_visible(&self, px: [f64; 2]) -> Result<[f64; 2]> {
        let (w, h) = (self.resolution[0] as f64, self.resolution[1] as f64);
        if !(px[0] >= 0.0 && px[0] < w && px[1] >= 0.0 && px[1] < h) {
            return Err(Error::Visibility { u: px[0], v: px[1] });
        }
        Ok(px)
    }

    /// Project a world point (m) and add pixel noise.
    pub fn project<R: Rng + ?Sized>(&self, world: [f64; 2], rng: &mut R) -> Result<[f64; 2]> {
        let mut px = self.check_visible(self.transform_true.apply(world))?;
        let sigma = self.sigma_px();
        if sigma > 0.0 {
            let n =
                Normal::new(0.0, sigma).map_err(|_| invalid("CameraModel", "bad noise sigma"))?;
            px[0] += n.sample(rng);
            px[1] += n.sample(rng);
        }
        Ok(px)
    }
}

/// Red (front) and blue (rear) marker centroids in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarkerPixels {
    pub red: [f64; 2],
    pub blue: [f64; 2],
}

/// Observe both markers, red at `center + offset·heading`, blue opposite.
pub fn observe_with<R: Rng + ?Sized>(
    camera: &CameraModel,
    state: &CapsuleState,
    marker_offset: f64,
    rng: &mut R,
) -> Result<MarkerPixels> {
    let (c, s) = (state.psi.cos(), state.psi.sin());
    let red = [state.x + marker_offset * c, state.y + marker_offset * s];
    let blue = [state.x - marker_offset * c, state.y - marker_offset * s];
    Ok(MarkerPixels {
        red: camera.project(red, rng)?,
        blue: camera.project(blue, rng)?,
    })
}

/// Single observation with its own seeded noise stream.
pub fn observe(
    camera: &CameraModel,
    state: &CapsuleState,
    marker_offset: f64,
    seed: u64,
) -> Result<MarkerPixels> {
    observe_with(
        camera,
        state,
        marker_offset,
        &mut ChaCha8Rng::seed_from_u64(seed),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationFit {
    /// Pixels → world (m).
    pub transform_est: PlanarTransform,
    /// Per-point Euclidean RMS residual, mm.
    pub residual_rms: f64,
    pub fiducials: Vec<([f64; 2], [f64; 2])>,
}

/// Fiducial layout: four corners at (±30, ±30) mm and the origin.
pub fn default_fiducials() -> Vec<[f64; 2]> {
    alloc::vec![
        [-0.03, -0.03],
        [0.03, -0.03],
        [0.03, 0.03],
        [-0.03, 0.03],
        [0.0, 0.0]
    ]
}

fn check_pairs(pixel: &[[f64; 2]], world: &[[f64; 2]], min: usize) -> Result<()> {
    if pixel.len() != world.len() {
        return Err(Error::Degenerate(
            "pixel and world point counts differ".into(),
        ));
    }
    if pixel.len() < min {
        return Err(Error::Degenerate(alloc::format!(
            "{} point pairs, need at least {min}",
            pixel.len()
        )));
    }
    Ok(())
}

fn centered(points: &[[f64; 2]]) -> (Vector2<f64>, Vec<Vector2<f64>>) {
    let n = points.len() as f64;
    let mean = points
        .iter()
        .fold(Vector2::zeros(), |a, p| a + Vector2::from(*p))
        / n;
    (
        mean,
        points.iter().map(|p| Vector2::from(*p) - mean).collect(),
    )
}

fn residual_mm(transform: &PlanarTransform, pixel: &[[f64; 2]], world: &[[f64; 2]]) -> f64 {
    let sum: f64 = pixel
        .iter()
        .zip(world)
        .map(|(p, w)| {
            let q = transform.apply(*p);
            (q[0] - w[0]).powi(2) + (q[1] - w[1]).powi(2)
        })
        .sum();
    (sum / pixel.len() as f64).sqrt() * 1e3
}

/// Least-squares affine fit of world coordinates from pixel coordinates.
pub fn fit_calibration(pixel: &[[f64; 2]], world: &[[f64; 2]]) -> Result<CalibrationFit> {
    check_pairs(pixel, world, 3)?;
    let (pm, pc) = centered(pixel);
    let (wm, wc) = centered(world);
    let spp = pc
        .iter()
        .fold(Matrix2::zeros(), |a, p| a + p * p.transpose());
    let swp = pc
        .iter()
        .zip(&wc)
        .fold(Matrix2::zeros(), |a, (p, w)| a + w * p.transpose());
    // collinear pixels leave the scatter matrix rank deficient
    let scale = spp.trace();
    if !(scale > 0.0) || spp.determinant().abs() <= 1e-12 * scale * scale {
        return Err(Error::Degenerate(
            "fiducials are collinear or coincident".into(),
        ));
    }
    let inv = spp
        .try_inverse()
        .ok_or_else(|| Error::Degenerate("singular fiducial scatter".into()))?;
    let a = swp * inv;
    let t = wm - a * pm;
    let affine = Affine2 {
        matrix: [[a[(0, 0)], a[(0, 1)]], [a[(1, 0)], a[(1, 1)]]],
        offset: [t.x, t.y],
    };
    let transform_est = PlanarTransform::Affine(affine);
    Ok(CalibrationFit {
        residual_rms: residual_mm(&transform_est, pixel, world),
        transform_est,
        fiducials: pixel.iter().copied().zip(world.iter().copied()).collect(),
    })
}

fn normalizer(points: &[[f64; 2]]) -> Result<Matrix3<f64>> {
    let (mean, c) = centered(points);
    let mean_dist = c.iter().map(|v| v.norm()).sum::<f64>() / c.len() as f64;
    if !(mean_dist > 0.0) {
        return Err(Error::Degenerate("coincident calibration points".into()));
    }
    let s = core::f64::consts::SQRT_2 / mean_dist;
    Ok(Matrix3::new(
        s,
        0.0,
        -s * mean.x,
        0.0,
        s,
        -s * mean.y,
        0.0,
        0.0,
        1.0,
    ))
}

/// Normalized DLT homography fit (needs at least four pairs).
pub fn fit_homography(pixel: &[[f64; 2]], world: &[[f64; 2]]) -> Result<CalibrationFit> {
    check_pairs(pixel, world, 4)?;
    let tp = normalizer(pixel)?;
    let tw = normalizer(world)?;
    let n = pixel.len();
    let mut a = DMatrix::<f64>::zeros(2 * n, 9);
    for (i, (p, w)) in pixel.iter().zip(world).enumerate() {
        let p = tp * Vector3::new(p[0], p[1], 1.0);
        let w = tw * Vector3::new(w[0], w[1], 1.0);
        let (x, y) = (p.x / p.z, p.y / p.z);
        let (u, v) = (w.x / w.z, w.y / w.z);
        let r0 = [-x, -y, -1.0, 0.0, 0.0, 0.0, u * x, u * y, u];
        let r1 = [0.0, 0.0, 0.0, -x, -y, -1.0, v * x, v * y, v];
        for j in 0..9 {
            a[(2 * i, j)] = r0[j];
            a[(2 * i + 1, j)] = r1[j];
        }
    }
    // null vector of A via the eigenvector of AᵀA with the smallest eigenvalue
    let ata = a.transpose() * &a;
    let eig = ata.symmetric_eigen();
    let (imin, _) =
        eig.eigenvalues
            .iter()
            .enumerate()
            .fold(
                (0, f64::INFINITY),
                |(bi, bv), (i, &v)| if v < bv { (i, v) } else { (bi, bv) },
            );
    let h = eig.eigenvectors.column(imin);
    let hn = Matrix3::new(h[0], h[1], h[2], h[3], h[4], h[5], h[6], h[7], h[8]);
    let tw_inv = tw
        .try_inverse()
        .ok_or_else(|| Error::Degenerate("singular normalization".into()))?;
    let mut hm = tw_inv * hn * tp;
    let scale = hm[(2, 2)];
    if scale.abs() < 1e-300 {
        return Err(Error::Degenerate(
            "homography maps the origin to infinity".into(),
        ));
    }
    hm /= scale;
    let transform_est = PlanarTransform::Homography([
        [hm[(0, 0)], hm[(0, 1)], hm[(0, 2)]],
        [hm[(1, 0)], hm[(1, 1)], hm[(1, 2)]],
        [hm[(2, 0)], hm[(2, 1)], hm[(2, 2)]],
    ]);
    Ok(CalibrationFit {
        residual_rms: residual_mm(&transform_est, pixel, world),
        transform_est,
        fiducials: pixel.iter().copied().zip(world.iter().copied()).collect(),
    })
}

/// Observe the fiducials through the camera and fit the chosen model.
pub fn calibrate<R: Rng + ?Sized>(
    camera: &CameraModel,
    fiducials: &[[f64; 2]],
    model: CalibrationModel,
    rng: &mut R,
) -> Result<CalibrationFit> {
    let pixel = fiducials
        .iter()
        .map(|w| camera.project(*w, rng))
        .collect::<Result<Vec<_>>>()?;
    match model {
        CalibrationModel::Affine => fit_calibration(&pixel, fiducials),
        CalibrationModel::Homography => fit_homography(&pixel, fiducials),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoseObservation {
    pub t: f64,
    /// m
    pub center: [f64; 2],
    /// rad, in (−π, π].
    pub heading: f64,
}

/// Midpoint of the two mapped markers; heading along blue → red.
pub fn reconstruct_pose(
    markers: &MarkerPixels,
    fit: &CalibrationFit,
    t: f64,
) -> Result<PoseObservation> {
    let r = fit.transform_est.apply(markers.red);
    let b = fit.transform_est.apply(markers.blue);
    let (dx, dy) = (r[0] - b[0], r[1] - b[1]);
    if dx == 0.0 && dy == 0.0 {
        return Err(Error::Degenerate(
            "markers coincide; heading undefined".into(),
        ));
    }
    Ok(PoseObservation {
        t,
        center: [0.5 * (r[0] + b[0]), 0.5 * (r[1] + b[1])],
        heading: dy.atan2(dx),
    })
}

/// Indices of the samples nearest to each camera frame time within `times`.
pub fn frame_indices(times: &[f64], frame_rate: f64) -> Vec<usize> {
    let (Some(&t0), Some(&t1)) = (times.first(), times.last()) else {
        return Vec::new();
    };
    let period = 1.0 / frame_rate;
    let frames = ((t1 - t0) / period + 1e-9).floor() as usize + 1;
    let mut out = Vec::with_capacity(frames);
    let mut j = 0;
    for k in 0..frames {
        let tf = t0 + k as f64 * period;
        while j + 1 < times.len() && (times[j + 1] - tf).abs() <= (times[j] - tf).abs() {
            j += 1;
        }
        out.push(j);
    }
    out
}

/// Camera pass over a true trajectory: frame selection, projection, reconstruction.
pub fn observe_track<R: Rng + ?Sized>(
    camera: &CameraModel,
    fit: &CalibrationFit,
    states: &[CapsuleState],
    marker_offset: f64,
    rng: &mut R,
) -> Result<Vec<PoseObservation>> {
    let times: Vec<f64> = states.iter().map(|s| s.t).collect();
    frame_indices(&times, camera.frame_rate)
        .into_iter()
        .map(|i| {
            let m = observe_with(camera, &states[i], marker_offset, rng)?;
            reconstruct_pose(&m, fit, states[i].t)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn noiseless() -> CameraModel {
        CameraModel {
            pixel_noise_sigma: 0.0,
            ..CameraModel::default()
        }
    }

    #[test]
    fn identity_fit() {
        let w = default_fiducials();
        let fit = fit_calibration(&w, &w).unwrap();
        let PlanarTransform::Affine(a) = fit.transform_est else {
            unreachable!()
        };
        for (x, y) in a
            .matrix
            .iter()
            .flatten()
            .zip(Affine2::IDENTITY.matrix.iter().flatten())
        {
            assert!((x - y).abs() < 1e-12);
        }
        assert!(fit.residual_rms < 1e-12);
    }

    #[test]
    fn translation_recovered() {
        let world: Vec<[f64; 2]> = (0..3)
            .flat_map(|i| (0..3).map(move |j| [i as f64 * 10.0, j as f64 * 10.0]))
            .collect();
        let pixel: Vec<[f64; 2]> = world.iter().map(|w| [w[0] - 5.0, w[1] + 3.0]).collect();
        let fit = fit_calibration(&pixel, &world).unwrap();
        let PlanarTransform::Affine(a) = fit.transform_est else {
            unreachable!()
        };
        assert!((a.offset[0] - 5.0).abs() < 1e-9 && (a.offset[1] + 3.0).abs() < 1e-9);
        assert!(fit.residual_rms < 1e-9);
    }

    #[test]
    fn collinear_rejected() {
        let p = [[0.0, 0.0], [1.0, 1.0], [2.0, 2.0], [3.0, 3.0]];
        assert!(matches!(fit_calibration(&p, &p), Err(Error::Degenerate(_))));
        assert!(matches!(
            fit_calibration(&p[..2], &p[..2]),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn pose_examples() {
        let fit = fit_calibration(&default_fiducials(), &default_fiducials()).unwrap();
        let m = MarkerPixels {
            red: [0.0, 0.005],
            blue: [0.0, -0.005],
        };
        let p = reconstruct_pose(&m, &fit, 0.0).unwrap();
        assert!(p.center[0].abs() < 1e-15 && p.center[1].abs() < 1e-15);
        assert_relative_eq!(p.heading, core::f64::consts::FRAC_PI_2, epsilon = 1e-12);
        let swapped = reconstruct_pose(
            &MarkerPixels {
                red: m.blue,
                blue: m.red,
            },
            &fit,
            0.0,
        )
        .unwrap();
        assert_relative_eq!(
            (p.heading - swapped.heading).abs(),
            core::f64::consts::PI,
            epsilon = 1e-12
        );
        let same = MarkerPixels {
            red: m.red,
            blue: m.red,
        };
        assert!(reconstruct_pose(&same, &fit, 0.0).is_err());
    }

    #[test]
    fn noiseless_round_trip() {
        let cam = noiseless();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let fit = calibrate(
            &cam,
            &default_fiducials(),
            CalibrationModel::Affine,
            &mut rng,
        )
        .unwrap();
        let st = CapsuleState::at(0.012, -0.021, 1.1);
        let m = observe(&cam, &st, 9.5e-3, 3).unwrap();
        let p = reconstruct_pose(&m, &fit, 0.0).unwrap();
        assert!((p.center[0] - st.x).abs() < 1e-12 && (p.center[1] - st.y).abs() < 1e-12);
        assert!((p.heading - 1.1).abs() < 1e-12);
    }

    #[test]
    fn seeded_noise_is_repeatable() {
        let cam = CameraModel::default();
        let st = CapsuleState::at(0.0, 0.0, 0.3);
        assert_eq!(
            observe(&cam, &st, 9.5e-3, 42).unwrap(),
            observe(&cam, &st, 9.5e-3, 42).unwrap()
        );
        assert_ne!(
            observe(&cam, &st, 9.5e-3, 42).unwrap(),
            observe(&cam, &st, 9.5e-3, 43).unwrap()
        );
    }

    #[test]
    fn marker_outside_frame() {
        let st = CapsuleState::at(0.2, 0.0, 0.0);
        assert!(matches!(
            observe(&CameraModel::default(), &st, 9.5e-3, 0),
            Err(Error::Visibility { .. })
        ));
    }

    #[test]
    fn homography_recovers_projective_map() {
        let h = [
            [900.0, 30.0, 950.0],
            [-20.0, -1100.0, 530.0],
            [0.4, -0.3, 1.0],
        ];
        let truth = PlanarTransform::Homography(h);
        let world: Vec<[f64; 2]> = default_fiducials()
            .into_iter()
            .chain([[0.01, 0.02], [-0.02, 0.015]])
            .collect();
        let pixel: Vec<[f64; 2]> = world.iter().map(|w| truth.apply(*w)).collect();
        let fit = fit_homography(&pixel, &world).unwrap();
        for (p, w) in pixel.iter().zip(&world) {
            let q = fit.transform_est.apply(*p);
            assert!((q[0] - w[0]).abs() < 1e-9 && (q[1] - w[1]).abs() < 1e-9);
        }
    }

    #[test]
    fn frames_pick_nearest_sample() {
        let times: Vec<f64> = (0..=1000).map(|k| k as f64 * 2e-4).collect();
        let idx = frame_indices(&times, 30.0);
        assert_eq!(idx.len(), 7);
        assert_eq!(idx[6], 1000);
        assert_eq!(idx[0], 0);
        assert_eq!(idx[1], 167);
    }
}
