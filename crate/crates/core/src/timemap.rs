//! Time maps: per-pixel normalized event time for one projected frame.
//!
//! Covers camera time maps built from events, the ideal projector time map,
//! and calibration of the projector time map from recordings of a plane.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::event::Event;
use crate::geometry::Rectification;
use crate::homography::{homography_from_corners, Homography, Point2};
use crate::trigger::FrameSlice;

/// Dense grid of normalized times in `[0, 1]`; NaN marks an undefined cell.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeMap {
    width: usize,
    height: usize,
    values: Vec<f32>,
}

impl TimeMap {
    pub fn undefined(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            values: vec![f32::NAN; width * height],
        }
    }

    pub fn from_values(width: usize, height: usize, values: Vec<f32>) -> Result<Self> {
        if values.len() != width * height {
            return Err(Error::DimensionMismatch(format!(
                "time map {width}x{height} needs {} values, got {}",
                width * height,
                values.len()
            )));
        }
        if let Some(v) = values
            .iter()
            .find(|v| !v.is_nan() && !(0.0..=1.0).contains(*v))
        {
            return Err(Error::InvalidArgument(format!(
                "time map value {v} outside [0, 1]"
            )));
        }
        Ok(Self {
            width,
            height,
            values,
        })
    }

    /// Builds a map from a per-cell function; `None` leaves the cell undefined.
    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> Option<f64>,
    ) -> Self {
        let mut values = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                values.push(f(x, y).map_or(f32::NAN, |v| v.clamp(0.0, 1.0) as f32));
            }
        }
        Self {
            width,
            height,
            values,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> Option<f32> {
        let v = self.values[y * self.width + x];
        (!v.is_nan()).then_some(v)
    }

    pub fn set(&mut self, x: usize, y: usize, value: Option<f32>) {
        self.values[y * self.width + x] = value.map_or(f32::NAN, |v| v.clamp(0.0, 1.0));
    }

    pub fn row(&self, y: usize) -> &[f32] {
        &self.values[y * self.width..(y + 1) * self.width]
    }

    pub fn defined_count(&self) -> usize {
        self.values.iter().filter(|v| !v.is_nan()).count()
    }

    /// Bilinear sample at a sub-pixel position. Defined only when every
    /// contributing source cell is defined.
    pub fn sample_bilinear(&self, x: f64, y: f64) -> Option<f64> {
        const SNAP: f64 = 1e-9;
        if !(x > -SNAP
            && y > -SNAP
            && x < self.width as f64 - 1.0 + SNAP
            && y < self.height as f64 - 1.0 + SNAP)
        {
            return None;
        }
        let x = x.clamp(0.0, (self.width - 1) as f64);
        let y = y.clamp(0.0, (self.height - 1) as f64);
        let (x0, y0) = (x.floor() as usize, y.floor() as usize);
        let (fx, fy) = (x - x0 as f64, y - y0 as f64);
        let xs: &[(usize, f64)] = if fx < SNAP {
            &[(x0, 1.0)]
        } else {
            &[(x0, 1.0 - fx), (x0 + 1, fx)]
        };
        let ys: &[(usize, f64)] = if fy < SNAP {
            &[(y0, 1.0)]
        } else {
            &[(y0, 1.0 - fy), (y0 + 1, fy)]
        };
        let mut acc = 0.0;
        for &(yy, wy) in ys {
            for &(xx, wx) in xs {
                acc += wx * wy * self.get(xx, yy)? as f64;
            }
        }
        Some(acc)
    }
}

/// Timing of the projector's raster scan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanModel {
    /// Scan lines per frame (the x axis of the tilted projector image).
    pub rows: u32,
    /// Microseconds per scan line.
    pub line_period: f64,
    pub frame_rate: f64,
}

impl ScanModel {
    pub fn new(rows: u32, frame_rate: f64) -> Self {
        Self {
            rows,
            line_period: 1e6 / (rows as f64 * frame_rate),
            frame_rate,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let expected = 1e6 / (self.rows as f64 * self.frame_rate);
        if self.rows == 0
            || self.frame_rate.is_nan()
            || self.frame_rate <= 0.0
            || ((self.line_period - expected) / expected).abs() > 1e-3
        {
            return Err(Error::InvalidArgument(format!(
                "line period {} µs inconsistent with {} rows at {} Hz",
                self.line_period, self.rows, self.frame_rate
            )));
        }
        Ok(())
    }
}

impl Default for ScanModel {
    fn default() -> Self {
        Self::new(720, 60.0)
    }
}

/// Camera time map of one frame: each cell holds the normalized time of the
/// first event seen there.
pub fn build_camera_time_map(
    events: &[Event],
    frame: &FrameSlice,
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
        if x >= width || y >= height {
            return Err(Error::OutOfBounds {
                x,
                y,
                width,
                height,
            });
        }
        let idx = y * width + x;
        if map.values[idx].is_nan() {
            let t = e.t.saturating_sub(frame.start_t) as f64 / span;
            map.values[idx] = t.clamp(0.0, 1.0) as f32;
        }
    }
    Ok(map)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum IdealVariant {
    /// Time depends on the scan line only: `x / width`.
    #[default]
    Simple,
    /// Adds the position within the line; lines are traversed bottom to top.
    Full,
}

/// Projector time map under constant laser speed and instantaneous line
/// jumps. Scan lines run along x (the projector is mounted tilted by 90°).
pub fn ideal_projector_time_map(width: usize, height: usize, variant: IdealVariant) -> TimeMap {
    let (w, h) = (width as f64, height as f64);
    TimeMap::from_fn(width, height, |x, y| {
        Some(match variant {
            IdealVariant::Simple => x as f64 / w,
            IdealVariant::Full => (x as f64 + (h - 1.0 - y as f64) / h) / w,
        })
    })
}

/// Per-cell mean over the maps that define that cell.
pub fn average_normalized_time_maps(maps: &[TimeMap]) -> Result<TimeMap> {
    let first = maps
        .first()
        .ok_or_else(|| Error::Empty("no time maps to average".into()))?;
    let (w, h) = (first.width, first.height);
    if let Some(m) = maps.iter().find(|m| m.width != w || m.height != h) {
        return Err(Error::DimensionMismatch(format!(
            "cannot average {}x{} with {w}x{h}",
            m.width, m.height
        )));
    }
    let mut sum = vec![0.0f64; w * h];
    let mut count = vec![0u32; w * h];
    for m in maps {
        for (i, v) in m.values.iter().enumerate() {
            if !v.is_nan() {
                sum[i] += *v as f64;
                count[i] += 1;
            }
        }
    }
    let values = sum
        .iter()
        .zip(&count)
        .map(|(&s, &c)| {
            if c == 0 {
                f32::NAN
            } else {
                (s / c as f64).clamp(0.0, 1.0) as f32
            }
        })
        .collect();
    Ok(TimeMap {
        width: w,
        height: h,
        values,
    })
}

/// Largest 4-connected region of defined cells, as a mask.
fn largest_component(map: &TimeMap) -> (Vec<bool>, usize) {
    let (w, h) = (map.width, map.height);
    let mut label = vec![0u32; w * h];
    let mut best = (0u32, 0usize);
    let mut next = 0u32;
    let mut queue = VecDeque::new();
    for start in 0..w * h {
        if label[start] != 0 || map.values[start].is_nan() {
            continue;
        }
        next += 1;
        label[start] = next;
        queue.push_back(start);
        let mut size = 0;
        while let Some(i) = queue.pop_front() {
            size += 1;
            let (x, y) = (i % w, i / w);
            let mut visit = |j: usize| {
                if label[j] == 0 && !map.values[j].is_nan() {
                    label[j] = next;
                    queue.push_back(j);
                }
            };
            if x > 0 {
                visit(i - 1);
            }
            if x + 1 < w {
                visit(i + 1);
            }
            if y > 0 {
                visit(i - w);
            }
            if y + 1 < h {
                visit(i + w);
            }
        }
        if size > best.1 {
            best = (next, size);
        }
    }
    (
        label.iter().map(|&l| l != 0 && l == best.0).collect(),
        best.1,
    )
}

/// Corners of the projected quadrilateral, ordered top-left, top-right,
/// bottom-right, bottom-left (image coordinates, y down).
///
/// Uses the extreme defined cells along the diagonals `x + y` and `x - y`
/// of the largest connected defined region.
pub fn find_projection_corners(map: &TimeMap) -> Result<[Point2; 4]> {
    let (mask, size) = largest_component(map);
    let total = map.width * map.height;
    if total == 0 || (size as f64) < 0.05 * total as f64 {
        return Err(Error::Degenerate(format!(
            "defined region covers {size} of {total} cells (< 5 %)"
        )));
    }
    let mut tl = (i64::MAX, (0, 0));
    let mut br = (i64::MIN, (0, 0));
    let mut tr = (i64::MIN, (0, 0));
    let mut bl = (i64::MAX, (0, 0));
    for (i, _) in mask.iter().enumerate().filter(|(_, &m)| m) {
        let (x, y) = ((i % map.width) as i64, (i / map.width) as i64);
        let (sum, diff) = (x + y, x - y);
        if sum < tl.0 {
            tl = (sum, (x, y));
        }
        if sum > br.0 {
            br = (sum, (x, y));
        }
        if diff > tr.0 {
            tr = (diff, (x, y));
        }
        if diff < bl.0 {
            bl = (diff, (x, y));
        }
    }
    let p = |(x, y): (i64, i64)| (x as f64, y as f64);
    Ok([p(tl.1), p(tr.1), p(br.1), p(bl.1)])
}

/// Inverse warp of `map` through `h` (source to destination) onto an
/// `out_width` x `out_height` grid.
pub fn warp_time_map(
    map: &TimeMap,
    h: &Homography,
    out_width: usize,
    out_height: usize,
) -> Result<TimeMap> {
    let inv = h.inverse()?;
    Ok(TimeMap::from_fn(out_width, out_height, |x, y| {
        let (sx, sy) = inv.apply((x as f64, y as f64))?;
        map.sample_bilinear(sx, sy)
    }))
}

/// Fills undefined runs that lie strictly between two defined cells of the
/// same row by linear interpolation. No extrapolation.
pub fn interpolate_rows(map: &TimeMap) -> TimeMap {
    let mut out = map.clone();
    for y in 0..map.height {
        let row = &mut out.values[y * map.width..(y + 1) * map.width];
        let mut last: Option<usize> = None;
        for x in 0..row.len() {
            if row[x].is_nan() {
                continue;
            }
            if let Some(l) = last {
                if x > l + 1 {
                    let (a, b) = (row[l] as f64, row[x] as f64);
                    let n = (x - l) as f64;
                    for (k, v) in row.iter_mut().enumerate().take(x).skip(l + 1) {
                        *v = (a + (b - a) * (k - l) as f64 / n) as f32;
                    }
                }
            }
            last = Some(x);
        }
    }
    out
}

/// Calibrated projector time map from camera time maps of a stationary plane
/// lit by a full white frame.
///
/// Steps: average the maps in camera space, locate the projected frame's
/// corners, map them onto the projector rectangle, warp, and fill gaps along
/// the time axis.
pub fn calibrate_time_map(
    planar_frames: &[TimeMap],
    proj_width: usize,
    proj_height: usize,
) -> Result<TimeMap> {
    let averaged = average_normalized_time_maps(planar_frames)?;
    let corners = find_projection_corners(&averaged)?;
    let (w, h) = ((proj_width - 1) as f64, (proj_height - 1) as f64);
    let target = [(0.0, 0.0), (w, 0.0), (w, h), (0.0, h)];
    let homography = homography_from_corners(&corners, &target)?;
    let warped = warp_time_map(&averaged, &homography, proj_width, proj_height)?;
    Ok(interpolate_rows(&warped))
}

/// Resamples a projector-space time map onto the rectified projector grid.
pub fn rectify_projector_time_map(map: &TimeMap, rect: &Rectification) -> Result<TimeMap> {
    let k = rect.calibration().projector;
    if map.width != k.width as usize || map.height != k.height as usize {
        return Err(Error::DimensionMismatch(format!(
            "projector time map is {}x{}, projector is {}x{}",
            map.width, map.height, k.width, k.height
        )));
    }
    let (rw, rh) = rect.calibration().rectified_size();
    Ok(TimeMap::from_fn(rw, rh, |x, y| {
        let (u, v) = rect.projector_pixel_at(x as f64, y as f64)?;
        map.sample_bilinear(u, v)
    }))
}
