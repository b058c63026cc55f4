//! Row-wise brute-force disparity search on rectified time maps, used as
//! the reference for X-map lookups.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::event::Event;
use crate::geometry::RectifyMap;
use crate::timemap::TimeMap;
use crate::trigger::FrameSlice;
use crate::xmap::DepthFrame;

/// Per-cell disparity in pixels; NaN marks undefined cells.
#[derive(Debug, Clone, PartialEq)]
pub struct DisparityMap {
    pub width: usize,
    pub height: usize,
    pub values: Vec<f32>,
}

impl DisparityMap {
    #[inline]
    pub fn get(&self, x: usize, y: usize) -> Option<f32> {
        let v = self.values[y * self.width + x];
        (!v.is_nan()).then_some(v)
    }

    pub fn defined_count(&self) -> usize {
        self.values.iter().filter(|v| !v.is_nan()).count()
    }
}

/// Rectified camera time map: events are rectified and splatted to the
/// nearest rectified cell, first event wins.
pub fn rectified_camera_time_map(
    events: &[Event],
    frame: &FrameSlice,
    rect: &RectifyMap,
    width: usize,
    height: usize,
) -> Result<TimeMap> {
    if frame.end_t <= frame.start_t {
        return Err(Error::ZeroSpan);
    }
    let span = (frame.end_t - frame.start_t) as f64;
    let mut map = TimeMap::undefined(width, height);
    for e in events {
        let (x, y) = (e.x as usize, e.y as usize);
        if x >= rect.width || y >= rect.height {
            continue;
        }
        let Some((xr, yr)) = rect.get(x, y) else {
            continue;
        };
        let (xi, yi) = (xr.round(), yr.round());
        if xi < 0.0 || yi < 0.0 || xi >= width as f64 || yi >= height as f64 {
            continue;
        }
        let (xi, yi) = (xi as usize, yi as usize);
        if map.get(xi, yi).is_none() {
            let t = e.t.saturating_sub(frame.start_t) as f64 / span;
            map.set(xi, yi, Some(t as f32));
        }
    }
    Ok(map)
}

/// For each defined camera cell, the disparity `d` in `0..=max_disparity`
/// minimising `|cam(x, y) - proj(x + d, y)|` over defined projector cells.
/// Ties go to the smallest `d`.
pub fn esl_init_search(
    cam_map: &TimeMap,
    proj_map: &TimeMap,
    max_disparity: usize,
) -> Result<DisparityMap> {
    if cam_map.height() != proj_map.height() {
        return Err(Error::DimensionMismatch(format!(
            "camera map has {} rows, projector map {}",
            cam_map.height(),
            proj_map.height()
        )));
    }
    let (w, h) = (cam_map.width(), cam_map.height());
    let pw = proj_map.width();
    let mut values = vec![f32::NAN; w * h];
    values.par_chunks_mut(w).enumerate().for_each(|(y, out)| {
        let proj_row = proj_map.row(y);
        for (xc, slot) in out.iter_mut().enumerate() {
            let Some(tc) = cam_map.get(xc, y) else {
                continue;
            };
            let mut best: Option<(usize, f32)> = None;
            for d in 0..=max_disparity {
                let xp = xc + d;
                if xp >= pw {
                    break;
                }
                let tp = proj_row[xp];
                if tp.is_nan() {
                    continue;
                }
                let diff = (tc - tp).abs();
                if best.is_none_or(|(_, b)| diff < b) {
                    best = Some((d, diff));
                }
            }
            if let Some((d, _)) = best {
                *slot = d as f32;
            }
        }
    });
    Ok(DisparityMap {
        width: w,
        height: h,
        values,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DisparityComparison {
    /// Events whose rectified cell is defined in the map.
    pub compared: usize,
    pub agreeing: usize,
    /// `None` when nothing could be compared.
    pub fraction: Option<f64>,
    /// Differences (event minus map), rounded to whole pixels.
    pub histogram: BTreeMap<i64, usize>,
}

pub fn compare_disparities(a: &DepthFrame, b: &DisparityMap, tol: f64) -> DisparityComparison {
    let mut compared = 0;
    let mut agreeing = 0;
    let mut histogram = BTreeMap::new();
    for p in &a.points {
        let (xi, yi) = (p.x_r.round(), p.y_r.round());
        if xi < 0.0 || yi < 0.0 || xi >= b.width as f64 || yi >= b.height as f64 {
            continue;
        }
        let Some(d) = b.get(xi as usize, yi as usize) else {
            continue;
        };
        let diff = p.disparity - d as f64;
        compared += 1;
        if diff.abs() <= tol {
            agreeing += 1;
        }
        *histogram.entry(diff.round() as i64).or_insert(0) += 1;
    }
    DisparityComparison {
        compared,
        agreeing,
        fraction: (compared > 0).then(|| agreeing as f64 / compared as f64),
        histogram,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::xmap::DepthPoint;

    #[test]
    fn ramp_inversion() {
        let w = 100;
        let proj = TimeMap::from_fn(w, 1, |x, _| Some(x as f64 / w as f64));
        let mut cam = TimeMap::undefined(w, 1);
        cam.set(10, 0, Some(0.25));
        let d = esl_init_search(&cam, &proj, 60).unwrap();
        assert_eq!(d.get(10, 0), Some(15.0));
        assert_eq!(d.get(11, 0), None);
    }

    #[test]
    fn height_mismatch() {
        assert!(esl_init_search(&TimeMap::undefined(4, 2), &TimeMap::undefined(4, 3), 2).is_err());
    }

    #[test]
    fn exact_ground_truth_on_linear_map() {
        let w = 120;
        let proj = TimeMap::from_fn(w, 3, |x, _| Some(x as f64 / w as f64));
        let truth = |x: usize, y: usize| 7 + (x + y) % 5;
        let cam = TimeMap::from_fn(w, 3, |x, y| {
            (x + truth(x, y) < w).then(|| (x + truth(x, y)) as f64 / w as f64)
        });
        let d = esl_init_search(&cam, &proj, 20).unwrap();
        for y in 0..3 {
            for x in 0..w {
                if x + truth(x, y) < w {
                    assert_eq!(d.get(x, y), Some(truth(x, y) as f32));
                }
            }
        }
    }

    #[test]
    fn invariant_under_common_shift() {
        let w = 64;
        let proj = TimeMap::from_fn(w, 2, |x, y| {
            Some(((x as f64 + y as f64) / 80.0).powi(2) * 0.8)
        });
        let cam = TimeMap::from_fn(w, 2, |x, y| {
            (x % 3 != 0).then(|| ((x as f64 + 4.3 + y as f64) / 80.0).powi(2) * 0.8)
        });
        let shift =
            |m: &TimeMap| TimeMap::from_fn(w, 2, |x, y| m.get(x, y).map(|v| v as f64 + 0.125));
        let a = esl_init_search(&cam, &proj, 30).unwrap();
        let b = esl_init_search(&shift(&cam), &shift(&proj), 30).unwrap();
        let bits = |m: &DisparityMap| m.values.iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a), bits(&b));
    }

    fn point(x_r: f64, y_r: f64, d: f64) -> DepthPoint {
        DepthPoint {
            x: 0,
            y: 0,
            x_r,
            y_r,
            disparity: d,
            depth: 1.0,
            t: 0,
        }
    }

    #[test]
    fn comparison_against_self() {
        let frame = DepthFrame {
            points: vec![point(1.0, 1.0, 5.0), point(2.0, 0.0, 7.0)],
            ..Default::default()
        };
        let mut map = DisparityMap {
            width: 4,
            height: 2,
            values: vec![f32::NAN; 8],
        };
        for p in &frame.points {
            map.values[p.y_r as usize * 4 + p.x_r as usize] = p.disparity as f32;
        }
        let c = compare_disparities(&frame, &map, 0.0);
        assert_eq!(c.fraction, Some(1.0));
        assert_eq!(c.histogram.get(&0), Some(&2));
    }

    #[test]
    fn comparison_on_disjoint_support() {
        let frame = DepthFrame {
            points: vec![point(1.0, 1.0, 5.0), point(3.0, 1.0, 4.0)],
            ..Default::default()
        };
        let mut map = DisparityMap {
            width: 4,
            height: 2,
            values: vec![f32::NAN; 8],
        };
        map.values[4 + 1] = 6.5;
        let c = compare_disparities(&frame, &map, 1.0);
        assert_eq!((c.compared, c.agreeing), (1, 0));
        assert_eq!(c.fraction, Some(0.0));
        map.values[4 + 1] = f32::NAN;
        assert_eq!(compare_disparities(&frame, &map, 1.0).fraction, None);
    }
}
