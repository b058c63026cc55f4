//! Evaluation: depth RMSE, fill rate, and planarity.

use nalgebra::{Matrix3, Point3, SymmetricEigen, Vector3};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{disparity_to_depth, StereoCalibration};
use crate::oracle::DisparityMap;
use crate::xmap::{DepthFrame, DiscardCounts};

/// Depth image in metres on the rectified camera grid; NaN is undefined.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthImage {
    pub width: usize,
    pub height: usize,
    pub values: Vec<f64>,
}

impl DepthImage {
    pub fn undefined(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            values: vec![f64::NAN; width * height],
        }
    }

    pub fn constant(width: usize, height: usize, depth: f64) -> Self {
        Self {
            width,
            height,
            values: vec![depth; width * height],
        }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> Option<f64> {
        let v = self.values[y * self.width + x];
        (!v.is_nan()).then_some(v)
    }

    /// Rasterizes per-event depth; the nearest event wins per pixel.
    pub fn from_depth_frame(frame: &DepthFrame, width: usize, height: usize) -> Self {
        let mut img = Self::undefined(width, height);
        for p in &frame.points {
            let (xi, yi) = (p.x_r.round(), p.y_r.round());
            if xi < 0.0 || yi < 0.0 || xi >= width as f64 || yi >= height as f64 {
                continue;
            }
            let slot = &mut img.values[yi as usize * width + xi as usize];
            if slot.is_nan() || p.depth < *slot {
                *slot = p.depth;
            }
        }
        img
    }

    /// Positive disparities converted to depth; zero disparity stays undefined.
    pub fn from_disparity_map(map: &DisparityMap, calib: &StereoCalibration) -> Self {
        let values = map
            .values
            .iter()
            .map(|&d| disparity_to_depth(d as f64, calib).unwrap_or(f64::NAN))
            .collect();
        Self {
            width: map.width,
            height: map.height,
            values,
        }
    }

    pub fn defined(&self) -> impl Iterator<Item = f64> + '_ {
        self.values.iter().copied().filter(|v| !v.is_nan())
    }
}

fn check_dims(a: &DepthImage, b: &DepthImage) -> Result<()> {
    if a.width != b.width || a.height != b.height {
        return Err(Error::DimensionMismatch(format!(
            "{}x{} vs {}x{}",
            a.width, a.height, b.width, b.height
        )));
    }
    Ok(())
}

/// Root mean square depth difference over cells defined in both images, cm.
pub fn rmse(est: &DepthImage, reference: &DepthImage) -> Result<f64> {
    check_dims(est, reference)?;
    let (sum, n) = est
        .values
        .iter()
        .zip(&reference.values)
        .filter(|(a, b)| !a.is_nan() && !b.is_nan())
        .fold((0.0, 0usize), |(s, n), (a, b)| {
            (s + (a - b) * (a - b), n + 1)
        });
    if n == 0 {
        return Err(Error::Empty("no cell defined in both depth images".into()));
    }
    Ok((sum / n as f64).sqrt() * 100.0)
}

/// Share of reference cells whose estimate lies within 1 % of the mean
/// reference depth.
pub fn fill_rate(est: &DepthImage, reference: &DepthImage) -> Result<f64> {
    check_dims(est, reference)?;
    let (sum, n) = reference
        .defined()
        .fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        return Err(Error::Empty(
            "reference depth image has no defined cell".into(),
        ));
    }
    let threshold = 0.01 * sum / n as f64;
    let hits = est
        .values
        .iter()
        .zip(&reference.values)
        .filter(|(a, b)| !a.is_nan() && !b.is_nan() && (*a - *b).abs() < threshold)
        .count();
    Ok(hits as f64 / n as f64)
}

/// Total-least-squares plane fit; returns the RMS point-to-plane distance in cm.
pub fn plane_fit_rmse(points: &[Point3<f64>]) -> Result<f64> {
    if points.len() < 3 {
        return Err(Error::Degenerate(format!(
            "plane fit needs 3 points, got {}",
            points.len()
        )));
    }
    let n = points.len() as f64;
    let centroid = points
        .iter()
        .fold(Vector3::zeros(), |acc, p| acc + p.coords)
        / n;
    let cov = points.iter().fold(Matrix3::zeros(), |acc, p| {
        let d = p.coords - centroid;
        acc + d * d.transpose()
    }) / n;
    let eig = SymmetricEigen::new(cov);
    let mut ev: Vec<(f64, Vector3<f64>)> = eig
        .eigenvalues
        .iter()
        .zip(eig.eigenvectors.column_iter())
        .map(|(&l, v)| (l, v.into_owned()))
        .collect();
    ev.sort_by(|a, b| a.0.total_cmp(&b.0));
    let spread = ev[2].0.max(f64::MIN_POSITIVE);
    if ev[1].0 <= 1e-12 * spread {
        return Err(Error::Degenerate(
            "points are collinear or coincident".into(),
        ));
    }
    let normal = ev[0].1;
    let ss: f64 = points
        .iter()
        .map(|p| (p.coords - centroid).dot(&normal).powi(2))
        .sum();
    Ok((ss / n).sqrt() * 100.0)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiscardReport {
    pub undefined_entry: usize,
    pub nonpositive_disparity: usize,
    pub out_of_bounds: usize,
    pub duplicate: usize,
}

impl From<DiscardCounts> for DiscardReport {
    fn from(c: DiscardCounts) -> Self {
        Self {
            undefined_entry: c.undefined_entry,
            nonpositive_disparity: c.nonpositive_disparity,
            out_of_bounds: c.out_of_bounds,
            duplicate: c.duplicate,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub rmse_cm: f64,
    pub fill_rate: f64,
    pub n_compared: usize,
    pub mean_scene_depth: f64,
    pub plane_fit_rmse_cm: Option<f64>,
    pub discard_counts: DiscardReport,
}

impl EvalReport {
    pub fn evaluate(
        est: &DepthImage,
        reference: &DepthImage,
        discards: DiscardCounts,
        plane_points: Option<&[Point3<f64>]>,
    ) -> Result<Self> {
        let rmse_cm = rmse(est, reference)?;
        let fill_rate = fill_rate(est, reference)?;
        let n_compared = est
            .values
            .iter()
            .zip(&reference.values)
            .filter(|(a, b)| !a.is_nan() && !b.is_nan())
            .count();
        let (sum, n) = reference
            .defined()
            .fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
        let plane_fit_rmse_cm = plane_points.map(plane_fit_rmse).transpose()?;
        Ok(Self {
            rmse_cm,
            fill_rate,
            n_compared,
            mean_scene_depth: sum / n as f64,
            plane_fit_rmse_cm,
            discard_counts: discards.into(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{Rotation3, Translation3};

    #[test]
    fn rmse_identities() {
        let a = DepthImage::constant(4, 3, 1.0);
        assert_eq!(rmse(&a, &a).unwrap(), 0.0);
        let b = DepthImage::constant(4, 3, 1.01);
        assert!((rmse(&b, &a).unwrap() - 1.0).abs() < 1e-9);
        assert!(rmse(&DepthImage::undefined(4, 3), &a).is_err());
        assert!(rmse(&DepthImage::constant(3, 3, 1.0), &a).is_err());
    }

    #[test]
    fn fill_rate_identities() {
        let a = DepthImage {
            width: 3,
            height: 1,
            values: vec![1.0, 2.0, f64::NAN],
        };
        assert_eq!(fill_rate(&a, &a).unwrap(), 1.0);
        assert_eq!(fill_rate(&DepthImage::undefined(3, 1), &a).unwrap(), 0.0);
        let off = DepthImage {
            width: 3,
            height: 1,
            values: vec![1.03, 2.03, f64::NAN],
        };
        assert_eq!(fill_rate(&off, &a).unwrap(), 0.0);
    }

    #[test]
    fn plane_fit_cases() {
        let flat: Vec<_> = (0..50)
            .map(|i| Point3::new((i % 7) as f64 * 0.1, (i / 7) as f64 * 0.1, 1.0))
            .collect();
        assert!(plane_fit_rmse(&flat).unwrap() < 1e-9);
        let bumpy: Vec<_> = (0..10)
            .flat_map(|i| (0..10).map(move |j| (i, j)))
            .map(|(i, j)| {
                Point3::new(
                    i as f64 * 0.1,
                    j as f64 * 0.1,
                    if (i + j) % 2 == 0 { 1.01 } else { 0.99 },
                )
            })
            .collect();
        assert!((plane_fit_rmse(&bumpy).unwrap() - 1.0).abs() < 1e-9);
        let line: Vec<_> = (0..10)
            .map(|i| Point3::new(i as f64, 2.0 * i as f64, 1.0))
            .collect();
        assert!(plane_fit_rmse(&line).is_err());
        assert!(plane_fit_rmse(&flat[..2]).is_err());
    }

    proptest::proptest! {
        #[test]
        fn plane_fit_is_rigid_invariant(ax in -3.0f64..3.0, ay in -3.0f64..3.0, az in -3.0f64..3.0,
                                        tx in -2.0f64..2.0, ty in -2.0f64..2.0, tz in -2.0f64..2.0) {
            let pts: Vec<_> = (0..64).map(|i| {
                let (u, v) = ((i % 8) as f64 * 0.05, (i / 8) as f64 * 0.05);
                Point3::new(u, v, 1.0 + 0.004 * ((i * 37 % 11) as f64 - 5.0))
            }).collect();
            let iso = Translation3::new(tx, ty, tz) * Rotation3::from_euler_angles(ax, ay, az);
            let moved: Vec<_> = pts.iter().map(|p| iso * p).collect();
            let a = plane_fit_rmse(&pts).unwrap();
            let b = plane_fit_rmse(&moved).unwrap();
            proptest::prop_assert!((a - b).abs() <= 1e-9 * a.max(1e-12) + 1e-12);
        }

        #[test]
        fn rmse_symmetric(vals in proptest::collection::vec(proptest::option::of(0.5f64..3.0), 12),
                          other in proptest::collection::vec(proptest::option::of(0.5f64..3.0), 12)) {
            let img = |v: &[Option<f64>]| DepthImage { width: 4, height: 3, values: v.iter().map(|x| x.unwrap_or(f64::NAN)).collect() };
            let (a, b) = (img(&vals), img(&other));
            if vals.iter().any(|v| v.is_some()) {
                proptest::prop_assert_eq!(rmse(&a, &a).unwrap(), 0.0);
                proptest::prop_assert_eq!(fill_rate(&a, &a).unwrap(), 1.0);
            }
            proptest::prop_assert_eq!(rmse(&a, &b).ok(), rmse(&b, &a).ok());
        }
    }
}
