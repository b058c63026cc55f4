//! Parametric scenes with analytic ray intersection, in the camera frame
//! (metres, z forward).

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Scene {
    /// Fronto-parallel plane.
    Plane { depth: f64 },
    /// Fronto-parallel treads joined by vertical risers. `edges` split the
    /// camera-frame x axis into `edges.len() + 1` bands, one per depth.
    Staircase { edges: Vec<f64>, depths: Vec<f64> },
    /// Sphere in front of a fronto-parallel background plane.
    Sphere {
        center: [f64; 3],
        radius: f64,
        background_depth: f64,
    },
    /// Surface `z = h(x, y)` bilinearly interpolated from a regular grid
    /// spanning `x_range` x `y_range` (clamped outside).
    Heightfield {
        x_range: [f64; 2],
        y_range: [f64; 2],
        cols: usize,
        rows: usize,
        depths: Vec<f64>,
    },
}

impl Scene {
    /// Named test scenes for the default rig: `plane` (1 m), `sphere`
    /// (r = 15 cm at 0.8 m before a 1 m wall) and `staircase` (0.7 to 1.0 m,
    /// receding to the right so no tread is hidden behind a riser).
    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "plane" => Some(Self::Plane { depth: 1.0 }),
            "sphere" => Some(Self::Sphere {
                center: [-0.1, 0.0, 0.8],
                radius: 0.15,
                background_depth: 1.0,
            }),
            "staircase" => Some(Self::Staircase {
                edges: vec![-0.25, -0.1, 0.05],
                depths: vec![0.7, 0.8, 0.9, 1.0],
            }),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |d: &f64| d.is_finite() && *d > 0.0;
        let ok = match self {
            Scene::Plane { depth } => positive(depth),
            Scene::Staircase { edges, depths } => {
                depths.len() == edges.len() + 1
                    && depths.iter().all(positive)
                    && edges.windows(2).all(|w| w[0] < w[1])
            }
            Scene::Sphere {
                center,
                radius,
                background_depth,
            } => {
                positive(radius)
                    && positive(background_depth)
                    && center[2] + radius < *background_depth
                    && center[2] - radius > 0.0
            }
            Scene::Heightfield {
                x_range,
                y_range,
                cols,
                rows,
                depths,
            } => {
                *cols >= 2
                    && *rows >= 2
                    && depths.len() == cols * rows
                    && depths.iter().all(positive)
                    && x_range[0] < x_range[1]
                    && y_range[0] < y_range[1]
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!(
                "invalid scene parameters: {self:?}"
            )))
        }
    }

    pub fn max_depth(&self) -> f64 {
        match self {
            Scene::Plane { depth } => *depth,
            Scene::Staircase { depths, .. } | Scene::Heightfield { depths, .. } => {
                depths.iter().copied().fold(0.0, f64::max)
            }
            Scene::Sphere {
                background_depth, ..
            } => *background_depth,
        }
    }

    /// Nearest positive ray parameter where `origin + t * dir` meets the surface.
    pub fn intersect(&self, origin: &Vector3<f64>, dir: &Vector3<f64>) -> Option<f64> {
        match self {
            Scene::Plane { depth } => plane_z(origin, dir, *depth),
            Scene::Staircase { edges, depths } => {
                let band = |x: f64| edges.partition_point(|&e| e <= x);
                let mut best: Option<f64> = None;
                let mut consider = |t: Option<f64>| {
                    if let Some(t) = t {
                        if best.is_none_or(|b| t < b) {
                            best = Some(t);
                        }
                    }
                };
                for (i, &z) in depths.iter().enumerate() {
                    consider(plane_z(origin, dir, z).filter(|&t| band(origin.x + t * dir.x) == i));
                }
                for (i, &e) in edges.iter().enumerate() {
                    if dir.x.abs() < 1e-15 {
                        continue;
                    }
                    let t = (e - origin.x) / dir.x;
                    if t <= 1e-12 {
                        continue;
                    }
                    let z = origin.z + t * dir.z;
                    let (lo, hi) = (depths[i].min(depths[i + 1]), depths[i].max(depths[i + 1]));
                    if z >= lo && z <= hi {
                        consider(Some(t));
                    }
                }
                best
            }
            Scene::Sphere {
                center,
                radius,
                background_depth,
            } => {
                let c = Vector3::from(*center);
                let oc = origin - c;
                let a = dir.dot(dir);
                let b = oc.dot(dir);
                let disc = b * b - a * (oc.dot(&oc) - radius * radius);
                let sphere = (disc >= 0.0)
                    .then(|| {
                        let sq = disc.sqrt();
                        [(-b - sq) / a, (-b + sq) / a]
                            .into_iter()
                            .find(|&t| t > 1e-12)
                    })
                    .flatten();
                sphere.or_else(|| plane_z(origin, dir, *background_depth))
            }
            Scene::Heightfield { .. } => self.march_heightfield(origin, dir),
        }
    }

    fn height_at(&self, x: f64, y: f64) -> f64 {
        let Scene::Heightfield {
            x_range,
            y_range,
            cols,
            rows,
            depths,
        } = self
        else {
            unreachable!("height_at on non-heightfield scene")
        };
        let gx = ((x - x_range[0]) / (x_range[1] - x_range[0]) * (*cols - 1) as f64)
            .clamp(0.0, (*cols - 1) as f64);
        let gy = ((y - y_range[0]) / (y_range[1] - y_range[0]) * (*rows - 1) as f64)
            .clamp(0.0, (*rows - 1) as f64);
        let (x0, y0) = (
            (gx.floor() as usize).min(cols - 2),
            (gy.floor() as usize).min(rows - 2),
        );
        let (fx, fy) = (gx - x0 as f64, gy - y0 as f64);
        let d = |i: usize, j: usize| depths[j * cols + i];
        (1.0 - fy) * ((1.0 - fx) * d(x0, y0) + fx * d(x0 + 1, y0))
            + fy * ((1.0 - fx) * d(x0, y0 + 1) + fx * d(x0 + 1, y0 + 1))
    }

    fn march_heightfield(&self, origin: &Vector3<f64>, dir: &Vector3<f64>) -> Option<f64> {
        let Scene::Heightfield { depths, .. } = self else {
            return None;
        };
        if dir.z <= 0.0 {
            return None;
        }
        let zmin = depths.iter().copied().fold(f64::INFINITY, f64::min);
        let zmax = depths.iter().copied().fold(0.0, f64::max);
        let t_start = ((zmin - origin.z) / dir.z).max(1e-9);
        let t_end = (zmax - origin.z) / dir.z + 1e-9;
        let gap = |t: f64| {
            let p = origin + t * dir;
            p.z - self.height_at(p.x, p.y)
        };
        let step = 1e-3 / dir.norm();
        let mut t0 = t_start;
        if gap(t0) >= 0.0 {
            return Some(t0);
        }
        while t0 < t_end {
            let t1 = (t0 + step).min(t_end);
            if gap(t1) >= 0.0 {
                let (mut lo, mut hi) = (t0, t1);
                for _ in 0..40 {
                    let mid = 0.5 * (lo + hi);
                    if gap(mid) >= 0.0 {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                return Some(hi);
            }
            t0 = t1;
        }
        None
    }
}

fn plane_z(origin: &Vector3<f64>, dir: &Vector3<f64>, z: f64) -> Option<f64> {
    if dir.z.abs() < 1e-15 {
        return None;
    }
    let t = (z - origin.z) / dir.z;
    (t > 1e-12).then_some(t)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plane_hit() {
        let s = Scene::Plane { depth: 2.0 };
        let t = s
            .intersect(&Vector3::zeros(), &Vector3::new(0.1, 0.0, 1.0))
            .unwrap();
        assert!((t - 2.0).abs() < 1e-12);
        assert!(s
            .intersect(&Vector3::zeros(), &Vector3::new(0.0, 0.0, -1.0))
            .is_none());
    }

    #[test]
    fn staircase_treads_and_risers() {
        let s = Scene::Staircase {
            edges: vec![0.0],
            depths: vec![0.8, 1.0],
        };
        s.validate().unwrap();
        let o = Vector3::zeros();
        assert!((s.intersect(&o, &Vector3::new(-0.1, 0.0, 1.0)).unwrap() - 0.8).abs() < 1e-12);
        assert!((s.intersect(&o, &Vector3::new(0.1, 0.0, 1.0)).unwrap() - 1.0).abs() < 1e-12);
        // A ray travelling left from x=+0.1 crosses the riser at x=0 between z=0.8 and z=1.
        let o = Vector3::new(0.1, 0.0, 0.0);
        let d = Vector3::new(-0.1125, 0.0, 1.0);
        let t = s.intersect(&o, &d).unwrap();
        let p = o + t * d;
        assert!(p.x.abs() < 1e-12 && p.z > 0.8 && p.z < 1.0);
    }

    #[test]
    fn sphere_in_front_of_background() {
        let s = Scene::Sphere {
            center: [0.0, 0.0, 1.0],
            radius: 0.2,
            background_depth: 1.5,
        };
        s.validate().unwrap();
        let t = s
            .intersect(&Vector3::zeros(), &Vector3::new(0.0, 0.0, 1.0))
            .unwrap();
        assert!((t - 0.8).abs() < 1e-12);
        let t = s
            .intersect(&Vector3::zeros(), &Vector3::new(0.5, 0.0, 1.0))
            .unwrap();
        assert!((t - 1.5).abs() < 1e-12);
    }

    #[test]
    fn heightfield_matches_flat_plane() {
        let s = Scene::Heightfield {
            x_range: [-1.0, 1.0],
            y_range: [-1.0, 1.0],
            cols: 3,
            rows: 3,
            depths: vec![1.2; 9],
        };
        s.validate().unwrap();
        let d = Vector3::new(0.2, -0.1, 1.0);
        let t = s.intersect(&Vector3::zeros(), &d).unwrap();
        assert!((t * d.z - 1.2).abs() < 1e-9);
    }

    #[test]
    fn heightfield_slope() {
        // z = 1 + 0.25 (x + 1) over x in [-1, 1]
        let s = Scene::Heightfield {
            x_range: [-1.0, 1.0],
            y_range: [-1.0, 1.0],
            cols: 2,
            rows: 2,
            depths: vec![1.0, 1.5, 1.0, 1.5],
        };
        let d = Vector3::new(0.1, 0.0, 1.0);
        let t = s.intersect(&Vector3::zeros(), &d).unwrap();
        let p = t * d;
        assert!((p.z - (1.0 + 0.25 * (p.x + 1.0))).abs() < 1e-9);
    }

    #[test]
    fn presets_are_valid() {
        for name in ["plane", "sphere", "staircase"] {
            Scene::preset(name).unwrap().validate().unwrap();
        }
        assert!(Scene::preset("cube").is_none());
    }

    #[test]
    fn invalid_scenes() {
        assert!(Scene::Plane { depth: 0.0 }.validate().is_err());
        assert!(Scene::Staircase {
            edges: vec![0.0],
            depths: vec![1.0]
        }
        .validate()
        .is_err());
        assert!(Scene::Sphere {
            center: [0.0, 0.0, 1.0],
            radius: 0.6,
            background_depth: 1.5
        }
        .validate()
        .is_err());
    }
}
