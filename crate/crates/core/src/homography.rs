//! Exact four-point projective transform.

use nalgebra::{Matrix3, SMatrix, SVector, Vector3};

use crate::error::{Error, Result};

pub type Point2 = (f64, f64);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Homography(pub Matrix3<f64>);

impl Homography {
    pub fn identity() -> Self {
        Self(Matrix3::identity())
    }

    pub fn apply(&self, (x, y): Point2) -> Option<Point2> {
        let v = self.0 * Vector3::new(x, y, 1.0);
        (v.z.abs() > f64::EPSILON).then(|| (v.x / v.z, v.y / v.z))
    }

    pub fn inverse(&self) -> Result<Self> {
        let scale = self.0.abs().max();
        if scale == 0.0 || (self.0 / scale).determinant().abs() < 1e-12 {
            return Err(Error::Degenerate("homography is singular".into()));
        }
        self.0
            .try_inverse()
            .map(Self)
            .ok_or_else(|| Error::Degenerate("homography is singular".into()))
    }

    /// Scales so that `h[2][2] == 1` (when possible).
    pub fn normalized(&self) -> Self {
        let s = self.0[(2, 2)];
        if s.abs() > f64::EPSILON {
            Self(self.0 / s)
        } else {
            *self
        }
    }
}

fn twice_area(a: Point2, b: Point2, c: Point2) -> f64 {
    (b.0 - a.0) * (c.1 - a.1) - (b.1 - a.1) * (c.0 - a.0)
}

fn check_general_position(pts: &[Point2; 4], which: &str) -> Result<()> {
    let scale = pts
        .iter()
        .flat_map(|&(x, y)| [x.abs(), y.abs()])
        .fold(1.0f64, f64::max);
    let tol = 1e-12 * scale * scale;
    for skip in 0..4 {
        let tri: Vec<Point2> = (0..4).filter(|&i| i != skip).map(|i| pts[i]).collect();
        if twice_area(tri[0], tri[1], tri[2]).abs() <= tol {
            return Err(Error::Degenerate(format!(
                "three {which} points are collinear"
            )));
        }
    }
    Ok(())
}

// Similarity transform taking the points to zero mean and mean distance sqrt(2).
fn conditioner(pts: &[Point2; 4]) -> Matrix3<f64> {
    let (mx, my) = pts
        .iter()
        .fold((0.0, 0.0), |(sx, sy), &(x, y)| (sx + x / 4.0, sy + y / 4.0));
    let mean_dist = pts
        .iter()
        .map(|&(x, y)| (x - mx).hypot(y - my))
        .sum::<f64>()
        / 4.0;
    let s = std::f64::consts::SQRT_2 / mean_dist;
    Matrix3::new(s, 0.0, -s * mx, 0.0, s, -s * my, 0.0, 0.0, 1.0)
}

fn transform(t: &Matrix3<f64>, (x, y): Point2) -> Point2 {
    let v = t * Vector3::new(x, y, 1.0);
    (v.x / v.z, v.y / v.z)
}

/// Solves for `H` with `dst[i] ~ H * src[i]` from exactly four
/// correspondences, no three of which may be collinear on either side.
pub fn homography_from_corners(src: &[Point2; 4], dst: &[Point2; 4]) -> Result<Homography> {
    check_general_position(src, "source")?;
    check_general_position(dst, "destination")?;

    let ts = conditioner(src);
    let td = conditioner(dst);

    let mut a = SMatrix::<f64, 8, 8>::zeros();
    let mut b = SVector::<f64, 8>::zeros();
    for i in 0..4 {
        let (x, y) = transform(&ts, src[i]);
        let (u, v) = transform(&td, dst[i]);
        let r = 2 * i;
        a.row_mut(r)
            .copy_from_slice(&[x, y, 1.0, 0.0, 0.0, 0.0, -u * x, -u * y]);
        a.row_mut(r + 1)
            .copy_from_slice(&[0.0, 0.0, 0.0, x, y, 1.0, -v * x, -v * y]);
        b[r] = u;
        b[r + 1] = v;
    }
    let h = a
        .lu()
        .solve(&b)
        .ok_or_else(|| Error::Degenerate("corner system is singular".into()))?;
    let hn = Matrix3::new(h[0], h[1], h[2], h[3], h[4], h[5], h[6], h[7], 1.0);
    let td_inv = td
        .try_inverse()
        .ok_or_else(|| Error::Degenerate("destination points coincide".into()))?;
    Ok(Homography(td_inv * hn * ts).normalized())
}
