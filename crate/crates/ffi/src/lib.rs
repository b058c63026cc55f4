//! C ABI over `xmap-core`.
//!
//! Objects cross the boundary as opaque handles created by `xmap_*_new` /
//! `xmap_*_read` style constructors and released with the matching
//! `xmap_*_free`. Every fallible call returns an [`XmapStatus`]; on failure
//! [`xmap_last_error`] describes the problem for the calling thread.
//! Output handles are written only on success.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use xmap_core::io::{calib, maps};
use xmap_core::pipeline::xmap_from_projector_map;
use xmap_core::simulator::default_calibration;
use xmap_core::timemap::TimeMap;
use xmap_core::{
    depth_frame, split_frames, DedupMode, DepthFrame, Error, Event, EventStream, PinholeIntrinsics,
    Polarity, Rectification, RectifyMap, StereoCalibration, TriggerConfig, XMap,
};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum XmapStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    Degenerate = 4,
    OutOfBounds = 5,
    NonPositiveDisparity = 6,
    ZeroSpan = 7,
    Empty = 8,
    Format = 9,
    Io = 10,
    /// A Rust panic was caught at the boundary.
    Internal = 11,
}

impl From<&Error> for XmapStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::InvalidArgument(_) => Self::InvalidArgument,
            Error::DimensionMismatch(_) => Self::DimensionMismatch,
            Error::Degenerate(_) => Self::Degenerate,
            Error::OutOfBounds { .. } => Self::OutOfBounds,
            Error::NonPositiveDisparity(_) => Self::NonPositiveDisparity,
            Error::ZeroSpan => Self::ZeroSpan,
            Error::Empty(_) => Self::Empty,
            Error::Format(_) => Self::Format,
            Error::Io(_) => Self::Io,
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum XmapDedup {
    KeepFirst = 0,
    KeepAll = 1,
}

/// Camera or projector intrinsics.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct XmapIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
}

/// One camera event. `polarity` is 1 for positive, 0 for negative.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct XmapEvent {
    pub t: u64,
    pub x: u16,
    pub y: u16,
    pub polarity: u8,
}

/// A detected frame: events `[begin, end)` of the input array.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct XmapFrame {
    pub start_t: u64,
    pub end_t: u64,
    pub begin: usize,
    pub end: usize,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct XmapPoint {
    pub x: u16,
    pub y: u16,
    pub x_r: f64,
    pub y_r: f64,
    pub disparity: f64,
    pub depth: f64,
    pub t: u64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct XmapDiscards {
    pub undefined_entry: usize,
    pub nonpositive_disparity: usize,
    pub out_of_bounds: usize,
    pub duplicate: usize,
}

pub struct XmapCalibration(StereoCalibration);
pub struct XmapRectifyMap(RectifyMap);
pub struct XmapXMap(XMap);
pub struct XmapDepthFrame {
    points: Vec<XmapPoint>,
    discards: XmapDiscards,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: String) {
    let msg = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn guard(f: impl FnOnce() -> Result<(), (XmapStatus, String)>) -> XmapStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => XmapStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            XmapStatus::Internal
        }
    }
}

fn core<T>(r: xmap_core::Result<T>) -> Result<T, (XmapStatus, String)> {
    r.map_err(|e| (XmapStatus::from(&e), e.to_string()))
}

fn null(what: &str) -> (XmapStatus, String) {
    (XmapStatus::NullPointer, format!("{what} is null"))
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, (XmapStatus, String)> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn slice<'a, T>(p: *const T, n: usize, what: &str) -> Result<&'a [T], (XmapStatus, String)> {
    if n == 0 {
        Ok(&[])
    } else if p.is_null() {
        Err(null(what))
    } else {
        Ok(std::slice::from_raw_parts(p, n))
    }
}

unsafe fn to_path(p: *const c_char) -> Result<PathBuf, (XmapStatus, String)> {
    let s = deref(p, "path").map(|_| CStr::from_ptr(p))?;
    s.to_str().map(PathBuf::from).map_err(|_| {
        (
            XmapStatus::InvalidArgument,
            "path is not valid UTF-8".into(),
        )
    })
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> Result<(), (XmapStatus, String)> {
    if out.is_null() {
        return Err(null("output handle"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn free<T>(p: *mut T) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

fn events_from(raw: &[XmapEvent]) -> Vec<Event> {
    raw.iter()
        .map(|e| Event {
            t: e.t,
            x: e.x,
            y: e.y,
            polarity: if e.polarity != 0 {
                Polarity::Positive
            } else {
                Polarity::Negative
            },
        })
        .collect()
}

/// Description of the last failure on this thread. Valid until the next
/// failing call on the same thread; empty if nothing has failed.
#[no_mangle]
pub extern "C" fn xmap_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version, static.
#[no_mangle]
pub extern "C" fn xmap_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// The built-in simulation rig.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn xmap_calibration_default(out: *mut *mut XmapCalibration) -> XmapStatus {
    guard(|| put(out, XmapCalibration(default_calibration())))
}

/// `rotation` is row-major 3x3 and, with `translation` (metres), maps the
/// camera frame to the projector frame.
///
/// # Safety
/// All pointers must be valid; `rotation` holds 9 and `translation` 3 values.
#[no_mangle]
pub unsafe extern "C" fn xmap_calibration_new(
    camera: *const XmapIntrinsics,
    projector: *const XmapIntrinsics,
    rotation: *const f64,
    translation: *const f64,
    out: *mut *mut XmapCalibration,
) -> XmapStatus {
    guard(|| {
        let intr =
            |i: &XmapIntrinsics| PinholeIntrinsics::new(i.fx, i.fy, i.cx, i.cy, i.width, i.height);
        let cam = core(intr(deref(camera, "camera")?))?;
        let proj = core(intr(deref(projector, "projector")?))?;
        let r = slice(rotation, 9, "rotation")?;
        let t = slice(translation, 3, "translation")?;
        let c = core(StereoCalibration::new(
            cam,
            proj,
            nalgebra::Matrix3::from_row_slice(r),
            nalgebra::Vector3::from_column_slice(t),
        ))?;
        put(out, XmapCalibration(c))
    })
}

/// # Safety
/// `path` must be a NUL-terminated string and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn xmap_calibration_read(
    path: *const c_char,
    out: *mut *mut XmapCalibration,
) -> XmapStatus {
    guard(|| {
        let c = core(calib::read_calibration(&to_path(path)?))?;
        put(out, XmapCalibration(c))
    })
}

/// Rectified grid size shared by both views.
///
/// # Safety
/// `c` must be a live handle; `width` and `height` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn xmap_calibration_rectified_size(
    c: *const XmapCalibration,
    width: *mut usize,
    height: *mut usize,
) -> XmapStatus {
    guard(|| {
        let (w, h) = deref(c, "calibration")?.0.rectified_size();
        if width.is_null() || height.is_null() {
            return Err(null("size output"));
        }
        *width = w;
        *height = h;
        Ok(())
    })
}

/// # Safety
/// `c` must be null or a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn xmap_calibration_free(c: *mut XmapCalibration) {
    free(c)
}

/// Camera-pixel to rectified-coordinate map for a calibration.
///
/// # Safety
/// `c` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn xmap_rectify_map_camera(
    c: *const XmapCalibration,
    out: *mut *mut XmapRectifyMap,
) -> XmapStatus {
    guard(|| {
        let rect = core(Rectification::new(&deref(c, "calibration")?.0))?;
        put(out, XmapRectifyMap(rect.camera_map()))
    })
}

/// # Safety
/// `path` must be a NUL-terminated string and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn xmap_rectify_map_read(
    path: *const c_char,
    out: *mut *mut XmapRectifyMap,
) -> XmapStatus {
    guard(|| {
        put(
            out,
            XmapRectifyMap(core(maps::read_rectify_map(&to_path(path)?))?),
        )
    })
}

/// # Safety
/// `m` must be null or a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn xmap_rectify_map_free(m: *mut XmapRectifyMap) {
    free(m)
}

/// Builds an X-map from a projector-space time map (`width * height`
/// row-major values, NaN where undefined). `time_columns == 0` uses the
/// projector width.
///
/// # Safety
/// `values` must hold `width * height` floats; `c` must be a live handle and
/// `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn xmap_xmap_from_time_map(
    values: *const f32,
    width: usize,
    height: usize,
    c: *const XmapCalibration,
    time_columns: usize,
    out: *mut *mut XmapXMap,
) -> XmapStatus {
    guard(|| {
        let n = width.checked_mul(height).ok_or((
            XmapStatus::InvalidArgument,
            "time map size overflows".to_string(),
        ))?;
        let map = core(TimeMap::from_values(
            width,
            height,
            slice(values, n, "values")?.to_vec(),
        ))?;
        let cols = (time_columns > 0).then_some(time_columns);
        put(
            out,
            XmapXMap(core(xmap_from_projector_map(
                &map,
                &deref(c, "calibration")?.0,
                cols,
            ))?),
        )
    })
}

/// # Safety
/// `path` must be a NUL-terminated string and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn xmap_xmap_read(
    path: *const c_char,
    out: *mut *mut XmapXMap,
) -> XmapStatus {
    guard(|| put(out, XmapXMap(core(maps::read_xmap(&to_path(path)?))?)))
}

/// Grid size of an X-map: `time_columns` by `rows`.
///
/// # Safety
/// `m` must be a live handle; the outputs valid for writes.
#[no_mangle]
pub unsafe extern "C" fn xmap_xmap_dims(
    m: *const XmapXMap,
    time_columns: *mut usize,
    rows: *mut usize,
) -> XmapStatus {
    guard(|| {
        let m = &deref(m, "xmap")?.0;
        if time_columns.is_null() || rows.is_null() {
            return Err(null("dims output"));
        }
        *time_columns = m.time_columns();
        *rows = m.height();
        Ok(())
    })
}

/// # Safety
/// `m` must be null or a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn xmap_xmap_free(m: *mut XmapXMap) {
    free(m)
}

/// Finds frames in a time-sorted event array using positive events only.
/// Writes up to `capacity` frames and the total number found to `count`;
/// frame ranges index the input array.
///
/// # Safety
/// `events` must hold `n` events, `frames` room for `capacity` frames, and
/// `count` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn xmap_split_frames(
    events: *const XmapEvent,
    n: usize,
    max_gap_us: u64,
    min_span_us: u64,
    frames: *mut XmapFrame,
    capacity: usize,
    count: *mut usize,
) -> XmapStatus {
    guard(|| {
        if count.is_null() {
            return Err(null("count"));
        }
        let raw = slice(events, n, "events")?;
        let cfg = TriggerConfig {
            max_intra_frame_gap: max_gap_us,
            min_frame_span: min_span_us,
            ..TriggerConfig::default()
        };
        if max_gap_us >= min_span_us {
            return Err((
                XmapStatus::InvalidArgument,
                "max_gap_us must be below min_span_us".into(),
            ));
        }
        // Indices of positive events, so ranges can be mapped back.
        let positive_idx: Vec<usize> = (0..raw.len()).filter(|&i| raw[i].polarity != 0).collect();
        let positive: Vec<Event> = events_from(raw)
            .into_iter()
            .filter(|e| e.polarity == Polarity::Positive)
            .collect();
        if positive.windows(2).any(|w| w[1].t < w[0].t) {
            return Err((XmapStatus::Format, "event timestamps are not sorted".into()));
        }
        let found = split_frames(&positive, &cfg);
        if capacity > 0 && frames.is_null() {
            return Err(null("frames"));
        }
        for (i, f) in found.iter().take(capacity).enumerate() {
            *frames.add(i) = XmapFrame {
                start_t: f.start_t,
                end_t: f.end_t,
                begin: positive_idx[f.event_range.start],
                end: positive_idx[f.event_range.end - 1] + 1,
            };
        }
        *count = found.len();
        Ok(())
    })
}

/// Depth for the events of one frame. Negative events are ignored.
///
/// # Safety
/// Handles must be live, `events` must hold `n` events, `out` valid for
/// writes.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn xmap_depth_frame(
    xmap: *const XmapXMap,
    rect: *const XmapRectifyMap,
    c: *const XmapCalibration,
    events: *const XmapEvent,
    n: usize,
    start_t: u64,
    end_t: u64,
    dedup: XmapDedup,
    out: *mut *mut XmapDepthFrame,
) -> XmapStatus {
    guard(|| {
        let (xmap, rect, calib) = (
            &deref(xmap, "xmap")?.0,
            &deref(rect, "rectify map")?.0,
            &deref(c, "calibration")?.0,
        );
        if end_t < start_t {
            return Err((XmapStatus::InvalidArgument, "end_t precedes start_t".into()));
        }
        let (w, h) = (calib.camera.width, calib.camera.height);
        let dims = |v: u32| {
            u16::try_from(v)
                .map_err(|_| (XmapStatus::InvalidArgument, "sensor too large".to_string()))
        };
        let stream = core(EventStream::new(
            dims(w)?,
            dims(h)?,
            events_from(slice(events, n, "events")?),
        ))?;
        let positive = xmap_core::event::filter_positive(&stream);
        let frame = xmap_core::FrameSlice {
            start_t,
            end_t,
            event_range: 0..positive.len(),
        };
        let mode = match dedup {
            XmapDedup::KeepFirst => DedupMode::KeepFirst,
            XmapDedup::KeepAll => DedupMode::KeepAll,
        };
        let df: DepthFrame = core(depth_frame(
            positive.events(),
            &frame,
            xmap,
            rect,
            calib,
            mode,
        ))?;
        let points = df
            .points
            .iter()
            .map(|p| XmapPoint {
                x: p.x,
                y: p.y,
                x_r: p.x_r,
                y_r: p.y_r,
                disparity: p.disparity,
                depth: p.depth,
                t: p.t,
            })
            .collect();
        let d = df.discards;
        let discards = XmapDiscards {
            undefined_entry: d.undefined_entry,
            nonpositive_disparity: d.nonpositive_disparity,
            out_of_bounds: d.out_of_bounds,
            duplicate: d.duplicate,
        };
        put(out, XmapDepthFrame { points, discards })
    })
}

/// Number of points in a depth frame (0 for null).
///
/// # Safety
/// `f` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn xmap_depth_frame_len(f: *const XmapDepthFrame) -> usize {
    f.as_ref().map_or(0, |f| f.points.len())
}

/// Borrowed view of the points, valid until the frame is freed. Null for a
/// null or empty frame.
///
/// # Safety
/// `f` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn xmap_depth_frame_points(f: *const XmapDepthFrame) -> *const XmapPoint {
    match f.as_ref() {
        Some(f) if !f.points.is_empty() => f.points.as_ptr(),
        _ => ptr::null(),
    }
}

/// # Safety
/// `f` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn xmap_depth_frame_discards(
    f: *const XmapDepthFrame,
    out: *mut XmapDiscards,
) -> XmapStatus {
    guard(|| {
        let f = deref(f, "depth frame")?;
        if out.is_null() {
            return Err(null("discards output"));
        }
        *out = f.discards;
        Ok(())
    })
}

/// # Safety
/// `f` must be null or a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn xmap_depth_frame_free(f: *mut XmapDepthFrame) {
    free(f)
}
