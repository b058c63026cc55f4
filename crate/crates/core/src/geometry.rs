//! Pinhole camera/projector models, stereo rectification, and
//! disparity-to-depth conversion.
//!
//! Conventions:
//! - `rotation`/`translation` map camera-frame points into the projector
//!   frame: `X_proj = R * X_cam + t`.
//! - Both views are rectified onto a shared pinhole with the camera's `fx`
//!   as focal length and the camera principal point, on a grid with the
//!   camera's resolution.
//! - The rectified x axis points from the projector centre towards the
//!   camera centre, so disparity `x_proj_rect - x_cam_rect` is positive for
//!   points in front of the rig.

use nalgebra::{Matrix3, Point3, Vector3};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PinholeIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
}

impl PinholeIntrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, width: u32, height: u32) -> Result<Self> {
        let k = Self {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
        };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fx > 0.0 && self.fy > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "focal lengths must be positive (fx={}, fy={})",
                self.fx, self.fy
            )));
        }
        if !(0.0..self.width as f64).contains(&self.cx)
            || !(0.0..self.height as f64).contains(&self.cy)
        {
            return Err(Error::InvalidArgument(format!(
                "principal point ({}, {}) outside {}x{} image",
                self.cx, self.cy, self.width, self.height
            )));
        }
        Ok(())
    }

    /// Pixel coordinates of a point given in this device's frame.
    pub fn project(&self, p: &Vector3<f64>) -> Option<(f64, f64)> {
        if p.z <= 0.0 {
            return None;
        }
        Some((self.fx * p.x / p.z + self.cx, self.fy * p.y / p.z + self.cy))
    }

    /// Viewing ray (z = 1) through a pixel.
    pub fn ray(&self, u: f64, v: f64) -> Vector3<f64> {
        Vector3::new((u - self.cx) / self.fx, (v - self.cy) / self.fy, 1.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StereoCalibration {
    pub camera: PinholeIntrinsics,
    pub projector: PinholeIntrinsics,
    /// Camera frame to projector frame.
    pub rotation: Matrix3<f64>,
    /// Metres, camera frame to projector frame.
    pub translation: Vector3<f64>,
    pub rectified_focal: f64,
    pub baseline: f64,
}

impl StereoCalibration {
    pub fn new(
        camera: PinholeIntrinsics,
        projector: PinholeIntrinsics,
        rotation: Matrix3<f64>,
        translation: Vector3<f64>,
    ) -> Result<Self> {
        camera.validate()?;
        projector.validate()?;
        let ortho_err = (rotation.transpose() * rotation - Matrix3::identity())
            .abs()
            .max();
        if ortho_err > 1e-9 || rotation.determinant() < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "rotation is not a proper orthonormal matrix (|R^T R - I| = {ortho_err:e})"
            )));
        }
        let baseline = translation.norm();
        if baseline < 1e-9 {
            return Err(Error::Degenerate(format!(
                "baseline {baseline:e} m is too short"
            )));
        }
        Ok(Self {
            camera,
            projector,
            rotation,
            translation,
            rectified_focal: camera.fx,
            baseline,
        })
    }

    /// Projector centre expressed in the camera frame.
    pub fn projector_center(&self) -> Vector3<f64> {
        -(self.rotation.transpose() * self.translation)
    }

    /// Rectified principal point (shared by both views).
    pub fn rectified_center(&self) -> (f64, f64) {
        (self.camera.cx, self.camera.cy)
    }

    /// Rectified grid size (shared by both views).
    pub fn rectified_size(&self) -> (usize, usize) {
        (self.camera.width as usize, self.camera.height as usize)
    }
}

/// Dense source-pixel to rectified-coordinate lookup. Undefined entries
/// (rays that leave the rectified half-space) are stored as NaN.
///
/// Coordinates are stored interleaved so a lookup touches one cache line.
#[derive(Debug, Clone, PartialEq)]
pub struct RectifyMap {
    pub width: usize,
    pub height: usize,
    coords: Vec<[f64; 2]>,
}

impl RectifyMap {
    pub fn new(width: usize, height: usize, map_x: Vec<f64>, map_y: Vec<f64>) -> Result<Self> {
        if map_x.len() != width * height || map_y.len() != width * height {
            return Err(Error::DimensionMismatch(format!(
                "rectify map {width}x{height} needs {} entries, got {} / {}",
                width * height,
                map_x.len(),
                map_y.len()
            )));
        }
        Ok(Self {
            width,
            height,
            coords: map_x.into_iter().zip(map_y).map(|(x, y)| [x, y]).collect(),
        })
    }

    pub fn identity(width: usize, height: usize) -> Self {
        let coords = (0..height)
            .flat_map(|y| (0..width).map(move |x| [x as f64, y as f64]))
            .collect();
        Self {
            width,
            height,
            coords,
        }
    }

    /// Row-major `[x_r, y_r]` pairs.
    pub fn coords(&self) -> &[[f64; 2]] {
        &self.coords
    }

    /// Unchecked lookup used in the per-event hot path.
    #[inline]
    pub fn get(&self, x: usize, y: usize) -> Option<(f64, f64)> {
        let [rx, ry] = self.coords[y * self.width + x];
        (rx.is_finite() && ry.is_finite()).then_some((rx, ry))
    }

    /// Marks one entry as out of view.
    pub fn clear(&mut self, x: usize, y: usize) {
        self.coords[y * self.width + x] = [f64::NAN; 2];
    }
}

/// Rectified coordinates of a source pixel. `Ok(None)` means the pixel has
/// no rectified image (out of view).
pub fn rectify_point(map: &RectifyMap, x: usize, y: usize) -> Result<Option<(f64, f64)>> {
    if x >= map.width || y >= map.height {
        return Err(Error::OutOfBounds {
            x,
            y,
            width: map.width,
            height: map.height,
        });
    }
    Ok(map.get(x, y))
}

/// Rectifying rotations derived from a calibration.
#[derive(Debug, Clone, PartialEq)]
pub struct Rectification {
    calib: StereoCalibration,
    /// Camera frame to rectified frame.
    cam_to_rect: Matrix3<f64>,
    /// Projector frame to rectified (projector-centred) frame.
    proj_to_rect: Matrix3<f64>,
}

impl Rectification {
    pub fn new(calib: &StereoCalibration) -> Result<Self> {
        let baseline = calib.translation.norm();
        if baseline < 1e-9 {
            return Err(Error::Degenerate(format!(
                "baseline {baseline:e} m is too short"
            )));
        }
        let e1 = -calib.projector_center() / baseline;
        let e2 = Vector3::z().cross(&e1);
        if e2.norm() < 1e-6 {
            return Err(Error::Degenerate(
                "baseline is parallel to the optical axis".into(),
            ));
        }
        let e2 = e2.normalize();
        let e3 = e1.cross(&e2);
        let cam_to_rect = Matrix3::from_rows(&[e1.transpose(), e2.transpose(), e3.transpose()]);
        let proj_to_rect = cam_to_rect * calib.rotation.transpose();
        Ok(Self {
            calib: calib.clone(),
            cam_to_rect,
            proj_to_rect,
        })
    }

    pub fn calibration(&self) -> &StereoCalibration {
        &self.calib
    }

    pub fn cam_to_rect(&self) -> &Matrix3<f64> {
        &self.cam_to_rect
    }

    fn project_rectified(&self, r: &Vector3<f64>) -> Option<(f64, f64)> {
        if r.z <= 1e-12 {
            return None;
        }
        let f = self.calib.rectified_focal;
        let (cx, cy) = self.calib.rectified_center();
        Some((f * r.x / r.z + cx, f * r.y / r.z + cy))
    }

    fn rectified_ray(&self, xr: f64, yr: f64) -> Vector3<f64> {
        let f = self.calib.rectified_focal;
        let (cx, cy) = self.calib.rectified_center();
        Vector3::new((xr - cx) / f, (yr - cy) / f, 1.0)
    }

    pub fn rectify_camera_pixel(&self, u: f64, v: f64) -> Option<(f64, f64)> {
        self.project_rectified(&(self.cam_to_rect * self.calib.camera.ray(u, v)))
    }

    pub fn rectify_projector_pixel(&self, u: f64, v: f64) -> Option<(f64, f64)> {
        self.project_rectified(&(self.proj_to_rect * self.calib.projector.ray(u, v)))
    }

    /// Raw projector pixel seen at a rectified projector coordinate.
    pub fn projector_pixel_at(&self, xr: f64, yr: f64) -> Option<(f64, f64)> {
        let d = self.proj_to_rect.transpose() * self.rectified_ray(xr, yr);
        self.calib.projector.project(&d)
    }

    /// Raw camera pixel seen at a rectified camera coordinate.
    pub fn camera_pixel_at(&self, xr: f64, yr: f64) -> Option<(f64, f64)> {
        let d = self.cam_to_rect.transpose() * self.rectified_ray(xr, yr);
        self.calib.camera.project(&d)
    }

    /// Rectified camera coordinates of a camera-frame point.
    pub fn project_to_camera_rect(&self, p_cam: &Vector3<f64>) -> Option<(f64, f64)> {
        self.project_rectified(&(self.cam_to_rect * p_cam))
    }

    /// Rectified projector coordinates of a camera-frame point.
    pub fn project_to_projector_rect(&self, p_cam: &Vector3<f64>) -> Option<(f64, f64)> {
        let p_proj = self.calib.rotation * p_cam + self.calib.translation;
        self.project_rectified(&(self.proj_to_rect * p_proj))
    }

    pub fn camera_map(&self) -> RectifyMap {
        let k = self.calib.camera;
        self.build_map(k.width as usize, k.height as usize, |u, v| {
            self.rectify_camera_pixel(u, v)
        })
    }

    pub fn projector_map(&self) -> RectifyMap {
        let k = self.calib.projector;
        self.build_map(k.width as usize, k.height as usize, |u, v| {
            self.rectify_projector_pixel(u, v)
        })
    }

    fn build_map(
        &self,
        width: usize,
        height: usize,
        f: impl Fn(f64, f64) -> Option<(f64, f64)>,
    ) -> RectifyMap {
        let mut coords = Vec::with_capacity(width * height);
        for v in 0..height {
            for u in 0..width {
                let (rx, ry) = f(u as f64, v as f64).unwrap_or((f64::NAN, f64::NAN));
                coords.push([rx, ry]);
            }
        }
        RectifyMap {
            width,
            height,
            coords,
        }
    }
}

/// Camera and projector rectification maps for a pinhole, distortion-free rig.
pub fn compute_rectification(calib: &StereoCalibration) -> Result<(RectifyMap, RectifyMap)> {
    let r = Rectification::new(calib)?;
    Ok((r.camera_map(), r.projector_map()))
}

pub fn disparity_to_depth(d: f64, calib: &StereoCalibration) -> Result<f64> {
    if d.is_nan() || d <= 0.0 {
        return Err(Error::NonPositiveDisparity(d));
    }
    Ok(calib.rectified_focal * calib.baseline / d)
}

/// 3D point in the rectified camera frame (which coincides with the camera
/// frame for an already-rectified rig).
pub fn event_to_3d(xr: f64, yr: f64, d: f64, calib: &StereoCalibration) -> Result<Point3<f64>> {
    let z = disparity_to_depth(d, calib)?;
    let f = calib.rectified_focal;
    let (cx, cy) = calib.rectified_center();
    Ok(Point3::new((xr - cx) * z / f, (yr - cy) * z / f, z))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn intr(f: f64, w: u32, h: u32) -> PinholeIntrinsics {
        PinholeIntrinsics::new(f, f, w as f64 / 2.0, h as f64 / 2.0, w, h).unwrap()
    }

    fn simple_calib(f: f64, b: f64) -> StereoCalibration {
        StereoCalibration::new(
            intr(f, 640, 480),
            intr(f, 640, 480),
            Matrix3::identity(),
            Vector3::new(b, 0.0, 0.0),
        )
        .unwrap()
    }

    fn rotated_calib() -> StereoCalibration {
        let rot = nalgebra::Rotation3::from_axis_angle(&Vector3::x_axis(), 1f64.to_radians());
        StereoCalibration::new(
            intr(500.0, 640, 480),
            PinholeIntrinsics::new(1500.0, 1500.0, 360.0, 640.0, 720, 1280).unwrap(),
            *rot.matrix(),
            Vector3::new(0.1, 0.0, 0.0),
        )
        .unwrap()
    }

    #[test]
    fn aligned_rig_rectifies_to_identity() {
        let calib = simple_calib(500.0, 0.1);
        let (cam, proj) = compute_rectification(&calib).unwrap();
        let id = RectifyMap::identity(640, 480);
        for map in [&cam, &proj] {
            for (a, b) in map.coords().iter().zip(id.coords()) {
                assert!((a[0] - b[0]).abs() < 1e-9 && (a[1] - b[1]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn zero_baseline_is_rejected() {
        let r = StereoCalibration::new(
            intr(500.0, 64, 48),
            intr(500.0, 64, 48),
            Matrix3::identity(),
            Vector3::zeros(),
        );
        assert!(matches!(r, Err(Error::Degenerate(_))));
    }

    #[test]
    fn rotated_projector_rows_align() {
        let calib = rotated_calib();
        let rect = Rectification::new(&calib).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let p = Vector3::new(
                rng.random_range(-0.4..0.4),
                rng.random_range(-0.3..0.3),
                rng.random_range(0.5..2.0),
            );
            let (_, yc) = rect.project_to_camera_rect(&p).unwrap();
            let (_, yp) = rect.project_to_projector_rect(&p).unwrap();
            assert!((yc - yp).abs() < 1e-6 * 480.0, "{yc} vs {yp}");
        }
    }

    #[test]
    fn rectify_point_matches_analytic_projection() {
        let calib = rotated_calib();
        let rect = Rectification::new(&calib).unwrap();
        let (_, proj) = compute_rectification(&calib).unwrap();
        let got = rectify_point(&proj, 0, 0).unwrap().unwrap();
        // Independent route: push the pixel ray through the projector pose by hand.
        let ray_proj = Vector3::new(-360.0 / 1500.0, -640.0 / 1500.0, 1.0);
        let ray_cam = calib.rotation.transpose() * ray_proj;
        let r = rect.cam_to_rect() * ray_cam;
        let want = (500.0 * r.x / r.z + 320.0, 500.0 * r.y / r.z + 240.0);
        assert!((got.0 - want.0).abs() < 1e-6 && (got.1 - want.1).abs() < 1e-6);
        // And back again.
        let (u, v) = rect.projector_pixel_at(got.0, got.1).unwrap();
        assert!(u.abs() < 1e-6 && v.abs() < 1e-6);
    }

    #[test]
    fn rectify_point_identity_and_bounds() {
        let id = RectifyMap::identity(640, 480);
        assert_eq!(rectify_point(&id, 10, 20).unwrap(), Some((10.0, 20.0)));
        assert!(matches!(
            rectify_point(&id, 640, 0),
            Err(Error::OutOfBounds { .. })
        ));
        let mut m = id.clone();
        m.clear(0, 0);
        assert_eq!(rectify_point(&m, 0, 0).unwrap(), None);
    }

    #[test]
    fn depth_formula() {
        let calib = StereoCalibration::new(
            intr(100.0, 64, 48),
            intr(100.0, 64, 48),
            Matrix3::identity(),
            Vector3::new(0.1, 0.0, 0.0),
        )
        .unwrap();
        assert!((disparity_to_depth(10.0, &calib).unwrap() - 1.0).abs() < 1e-12);
        assert!((disparity_to_depth(20.0, &calib).unwrap() - 0.5).abs() < 1e-12);
        assert!(disparity_to_depth(0.0, &calib).is_err());
        assert!(disparity_to_depth(-1.0, &calib).is_err());

        let (cx, cy) = calib.rectified_center();
        let p = event_to_3d(cx, cy, 10.0, &calib).unwrap();
        assert!((p - Point3::new(0.0, 0.0, 1.0)).norm() < 1e-12);
        let p = event_to_3d(cx + 100.0, cy, 10.0, &calib).unwrap();
        assert!((p - Point3::new(1.0, 0.0, 1.0)).norm() < 1e-12);
    }

    #[test]
    fn round_trip_through_disparity() {
        let calib = rotated_calib();
        let rect = Rectification::new(&calib).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let p = Vector3::new(
                rng.random_range(-0.4..0.4),
                rng.random_range(-0.3..0.3),
                rng.random_range(0.5..2.0),
            );
            let (xc, yc) = rect.project_to_camera_rect(&p).unwrap();
            let (xp, _) = rect.project_to_projector_rect(&p).unwrap();
            let q = event_to_3d(xc, yc, xp - xc, &calib).unwrap();
            let want = rect.cam_to_rect() * p;
            assert!((q.coords - want).norm() < 1e-6);
        }
    }

    proptest::proptest! {
        #[test]
        fn depth_strictly_decreasing(a in 0.01f64..1000.0, b in 0.01f64..1000.0) {
            proptest::prop_assume!(a < b);
            let calib = simple_calib(500.0, 0.1);
            proptest::prop_assert!(disparity_to_depth(a, &calib).unwrap() > disparity_to_depth(b, &calib).unwrap());
        }
    }
}
