//! X-maps: the `(y, t) -> x` lookup that turns an event's timestamp directly
//! into a rectified projector column, and per-event disparity from it.
//!
//! The projector X-map is built once from a rectified projector time map by
//! searching each row for the column whose time is closest to every time
//! bin. At run time each event costs two table reads: its rectified camera
//! coordinate and the X-map entry for its row and time bin. Disparity is the
//! difference of the two x coordinates.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::event::{DedupMode, Event};
use crate::geometry::{RectifyMap, StereoCalibration};
use crate::timemap::TimeMap;
use crate::trigger::FrameSlice;

/// Dense `(row, time column) -> rectified projector x` table; NaN marks
/// undefined entries.
#[derive(Debug, Clone, PartialEq)]
pub struct XMap {
    /// Width of the rectified grid the entries index into.
    width: usize,
    height: usize,
    time_columns: usize,
    entries: Vec<f32>,
}

impl XMap {
    pub fn from_entries(
        width: usize,
        height: usize,
        time_columns: usize,
        entries: Vec<f32>,
    ) -> Result<Self> {
        if entries.len() != height * time_columns {
            return Err(Error::DimensionMismatch(format!(
                "x-map with {height} rows x {time_columns} columns needs {} entries, got {}",
                height * time_columns,
                entries.len()
            )));
        }
        if let Some(v) = entries
            .iter()
            .find(|v| !v.is_nan() && !(0.0..width as f32).contains(*v))
        {
            return Err(Error::InvalidArgument(format!(
                "x-map entry {v} outside [0, {width})"
            )));
        }
        Ok(Self {
            width,
            height,
            time_columns,
            entries,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn time_columns(&self) -> usize {
        self.time_columns
    }

    pub fn entries(&self) -> &[f32] {
        &self.entries
    }

    #[inline]
    pub fn get(&self, y: usize, column: usize) -> Option<f32> {
        let v = self.entries[y * self.time_columns + column];
        (!v.is_nan()).then_some(v)
    }

    pub fn row(&self, y: usize) -> &[f32] {
        &self.entries[y * self.time_columns..(y + 1) * self.time_columns]
    }

    /// Centre of time column `k` in normalized frame time.
    pub fn column_center(&self, k: usize) -> f64 {
        (k as f64 + 0.5) / self.time_columns as f64
    }

    /// Time column for a normalized time, clamped into range.
    #[inline]
    pub fn column_of(&self, t_norm: f64) -> usize {
        let k = (t_norm * self.time_columns as f64).floor();
        if k <= 0.0 {
            0
        } else {
            (k as usize).min(self.time_columns - 1)
        }
    }
}

/// Max time difference accepted when filling the X-map: two scan lines of a
/// projector with `w` lines.
pub fn max_time_difference(w: usize) -> f64 {
    2.0 / w as f64
}

/// Builds the projector X-map with one time column per scan line.
pub fn build_projector_xmap(m: &TimeMap, w: usize) -> Result<XMap> {
    build_projector_xmap_with_columns(m, w, w)
}

/// Builds the projector X-map from a rectified projector time map.
///
/// For every row `y` and time column centre `t`, the entry is the column `x`
/// minimising `|t - m(x, y)|` among cells within `2 / w` of `t`; ties go to
/// the smallest `x`. Entries with no qualifying cell stay undefined.
pub fn build_projector_xmap_with_columns(
    m: &TimeMap,
    w: usize,
    time_columns: usize,
) -> Result<XMap> {
    if w < 2 {
        return Err(Error::InvalidArgument(format!(
            "projector width must be at least 2, got {w}"
        )));
    }
    if time_columns == 0 {
        return Err(Error::InvalidArgument(
            "x-map needs at least one time column".into(),
        ));
    }
    let threshold = max_time_difference(w);
    let mut entries = vec![f32::NAN; m.height() * time_columns];
    entries
        .par_chunks_mut(time_columns)
        .enumerate()
        .for_each(|(y, out)| {
            let candidates: Vec<(usize, f64)> = m
                .row(y)
                .iter()
                .enumerate()
                .filter(|(_, v)| !v.is_nan())
                .map(|(x, &v)| (x, v as f64))
                .collect();
            for (k, slot) in out.iter_mut().enumerate() {
                let t = (k as f64 + 0.5) / time_columns as f64;
                let mut best: Option<(usize, f64)> = None;
                for &(x, v) in &candidates {
                    let td = (t - v).abs();
                    if td <= threshold && best.is_none_or(|(_, b)| td < b) {
                        best = Some((x, td));
                    }
                }
                if let Some((x, _)) = best {
                    *slot = x as f32;
                }
            }
        });
    Ok(XMap {
        width: m.width(),
        height: m.height(),
        time_columns,
        entries,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DiscardReason {
    UndefinedEntry,
    NonPositiveDisparity,
    OutOfBounds,
}

/// Disparity for one rectified event, or the reason it is discarded.
#[inline]
pub fn lookup_disparity(
    xmap: &XMap,
    x_cr: f64,
    y_cr: f64,
    t: u64,
    frame: &FrameSlice,
) -> Result<f64, DiscardReason> {
    FrameLookup::new(xmap, frame).disparity(x_cr, y_cr, t)
}

/// Per-frame constants of [`lookup_disparity`], hoisted out of the event loop.
struct FrameLookup<'a> {
    xmap: &'a XMap,
    start_t: u64,
    span: f64,
    columns: u64,
    rows: f64,
}

impl<'a> FrameLookup<'a> {
    fn new(xmap: &'a XMap, frame: &FrameSlice) -> Self {
        let span = frame.end_t.saturating_sub(frame.start_t).max(1);
        Self {
            xmap,
            start_t: frame.start_t,
            span: span as f64,
            columns: xmap.time_columns as u64,
            rows: xmap.height as f64,
        }
    }

    #[inline]
    fn disparity(&self, x_cr: f64, y_cr: f64, t: u64) -> Result<f64, DiscardReason> {
        let yi = y_cr.round();
        if !(yi >= 0.0 && yi < self.rows) {
            return Err(DiscardReason::OutOfBounds);
        }
        // floor(t_norm * columns), computed from the exact integer product so
        // events on a column boundary land in the upper column.
        let k = (t.saturating_sub(self.start_t).saturating_mul(self.columns) as f64 / self.span)
            as usize;
        let column = k.min(self.xmap.time_columns - 1);
        let x_pr = self.xmap.entries[yi as usize * self.xmap.time_columns + column];
        if x_pr.is_nan() {
            return Err(DiscardReason::UndefinedEntry);
        }
        let d = x_pr as f64 - x_cr;
        if d > 0.0 {
            Ok(d)
        } else {
            Err(DiscardReason::NonPositiveDisparity)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct DiscardCounts {
    pub undefined_entry: usize,
    pub nonpositive_disparity: usize,
    pub out_of_bounds: usize,
    /// Dropped by coordinate de-duplication before lookup.
    pub duplicate: usize,
}

impl DiscardCounts {
    pub fn record(&mut self, reason: DiscardReason) {
        match reason {
            DiscardReason::UndefinedEntry => self.undefined_entry += 1,
            DiscardReason::NonPositiveDisparity => self.nonpositive_disparity += 1,
            DiscardReason::OutOfBounds => self.out_of_bounds += 1,
        }
    }

    pub fn total(&self) -> usize {
        self.undefined_entry + self.nonpositive_disparity + self.out_of_bounds + self.duplicate
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DepthPoint {
    /// Source camera pixel.
    pub x: u16,
    pub y: u16,
    pub x_r: f64,
    pub y_r: f64,
    pub disparity: f64,
    /// Metres.
    pub depth: f64,
    pub t: u64,
}

/// Per-event depth for one projected frame.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DepthFrame {
    pub points: Vec<DepthPoint>,
    pub start_t: u64,
    pub end_t: u64,
    pub discards: DiscardCounts,
}

impl DepthFrame {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Depth for every event of a frame: rectify, look up, convert.
///
/// `events` are the frame's events (positive polarity, time-sorted). With
/// [`DedupMode::KeepFirst`] only the earliest event per pixel is used.
pub fn depth_frame(
    events: &[Event],
    frame: &FrameSlice,
    xmap: &XMap,
    rect: &RectifyMap,
    calib: &StereoCalibration,
    dedup: DedupMode,
) -> Result<DepthFrame> {
    let (cw, ch) = (calib.camera.width as usize, calib.camera.height as usize);
    if rect.width != cw || rect.height != ch {
        return Err(Error::DimensionMismatch(format!(
            "rectify map is {}x{}, camera is {cw}x{ch}",
            rect.width, rect.height
        )));
    }
    let (rw, rh) = calib.rectified_size();
    if xmap.width != rw || xmap.height != rh {
        return Err(Error::DimensionMismatch(format!(
            "x-map covers {}x{}, rectified grid is {rw}x{rh}",
            xmap.width, xmap.height
        )));
    }

    let fb = calib.rectified_focal * calib.baseline;
    let mut out = DepthFrame {
        points: Vec::with_capacity(events.len()),
        start_t: frame.start_t,
        end_t: frame.end_t,
        discards: DiscardCounts::default(),
    };
    let lookup = FrameLookup::new(xmap, frame);
    let mut seen = match dedup {
        DedupMode::KeepFirst => vec![false; cw * ch],
        DedupMode::KeepAll => Vec::new(),
    };
    for e in events {
        let (x, y) = (e.x as usize, e.y as usize);
        if x >= cw || y >= ch {
            out.discards.out_of_bounds += 1;
            continue;
        }
        if dedup == DedupMode::KeepFirst && std::mem::replace(&mut seen[y * cw + x], true) {
            out.discards.duplicate += 1;
            continue;
        }
        let Some((x_r, y_r)) = rect.get(x, y) else {
            out.discards.out_of_bounds += 1;
            continue;
        };
        match lookup.disparity(x_r, y_r, e.t) {
            Ok(d) => out.points.push(DepthPoint {
                x: e.x,
                y: e.y,
                x_r,
                y_r,
                disparity: d,
                depth: fb / d,
                t: e.t,
            }),
            Err(reason) => out.discards.record(reason),
        }
    }
    Ok(out)
}
