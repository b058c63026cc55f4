//! Glue for running the stages end to end on a recorded or simulated stream.

use crate::error::{Error, Result};
use crate::event::{filter_positive, EventStream, Polarity};
use crate::geometry::{Rectification, RectifyMap, StereoCalibration};
use crate::metrics::DepthImage;
use crate::oracle::{esl_init_search, rectified_camera_time_map, DisparityMap};
use crate::simulator::{EventOrigin, GroundTruth};
use crate::timemap::{
    build_camera_time_map, calibrate_time_map, rectify_projector_time_map, TimeMap,
};
use crate::trigger::{split_frames, FrameSlice, TriggerConfig};
use crate::xmap::{build_projector_xmap_with_columns, DepthFrame, DepthPoint, XMap};

/// Positive events and the frames detected in them. Frame ranges index the
/// returned stream.
pub fn positive_frames(
    stream: &EventStream,
    cfg: &TriggerConfig,
) -> (EventStream, Vec<FrameSlice>) {
    let positive = filter_positive(stream);
    let frames = split_frames(positive.events(), cfg);
    (positive, frames)
}

/// Rectifies a projector-space time map and builds its X-map. `time_columns`
/// defaults to the projector width.
pub fn xmap_from_projector_map(
    map: &TimeMap,
    calib: &StereoCalibration,
    time_columns: Option<usize>,
) -> Result<XMap> {
    let rect = Rectification::new(calib)?;
    let rectified = rectify_projector_time_map(map, &rect)?;
    let w = calib.projector.width as usize;
    build_projector_xmap_with_columns(&rectified, w, time_columns.unwrap_or(w))
}

/// Calibrated projector time map from a recording of a plane under full
/// projection.
pub fn calibrate_from_stream(
    stream: &EventStream,
    cfg: &TriggerConfig,
    calib: &StereoCalibration,
) -> Result<TimeMap> {
    let (positive, frames) = positive_frames(stream, cfg);
    if frames.is_empty() {
        return Err(Error::Empty(
            "no frames detected for time-map calibration".into(),
        ));
    }
    let (w, h) = (
        stream.sensor_width() as usize,
        stream.sensor_height() as usize,
    );
    let maps = frames
        .iter()
        .map(|f| build_camera_time_map(&positive.events()[f.event_range.clone()], f, w, h))
        .collect::<Result<Vec<_>>>()?;
    calibrate_time_map(
        &maps,
        calib.projector.width as usize,
        calib.projector.height as usize,
    )
}

/// Oracle disparities for one frame.
pub fn oracle_disparity(
    positive: &EventStream,
    frame: &FrameSlice,
    projector_map: &TimeMap,
    cam_rect: &RectifyMap,
    calib: &StereoCalibration,
    max_disparity: usize,
) -> Result<DisparityMap> {
    let rect = Rectification::new(calib)?;
    let proj = rectify_projector_time_map(projector_map, &rect)?;
    let (rw, rh) = calib.rectified_size();
    let cam = rectified_camera_time_map(
        &positive.events()[frame.event_range.clone()],
        frame,
        cam_rect,
        rw,
        rh,
    )?;
    esl_init_search(&cam, &proj, max_disparity)
}

/// Defined oracle cells as depth points (camera pixel fields hold the cell).
pub fn disparity_map_points(
    map: &DisparityMap,
    frame: &FrameSlice,
    calib: &StereoCalibration,
) -> DepthFrame {
    let fb = calib.rectified_focal * calib.baseline;
    let mut points = Vec::new();
    for y in 0..map.height {
        for x in 0..map.width {
            if let Some(d) = map.get(x, y).filter(|&d| d > 0.0) {
                let d = d as f64;
                points.push(DepthPoint {
                    x: x as u16,
                    y: y as u16,
                    x_r: x as f64,
                    y_r: y as f64,
                    disparity: d,
                    depth: fb / d,
                    t: 0,
                });
            }
        }
    }
    DepthFrame {
        points,
        start_t: frame.start_t,
        end_t: frame.end_t,
        discards: Default::default(),
    }
}

/// Ground-truth depth on the rectified grid for one frame: each laser event
/// of the frame contributes its true depth at its rectified pixel, nearest
/// surface wins. `stream` and `truth` must be parallel (as written by the
/// simulator); `frame` indexes the positive sub-stream.
pub fn truth_depth_image(
    stream: &EventStream,
    truth: &GroundTruth,
    frame: &FrameSlice,
    cam_rect: &RectifyMap,
    calib: &StereoCalibration,
) -> Result<DepthImage> {
    if stream.len() != truth.records.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} events but {} truth records",
            stream.len(),
            truth.records.len()
        )));
    }
    let (rw, rh) = calib.rectified_size();
    let mut img = DepthImage::undefined(rw, rh);
    let positive = stream
        .events()
        .iter()
        .zip(&truth.records)
        .filter(|(e, _)| e.polarity == Polarity::Positive);
    for (e, r) in positive
        .skip(frame.event_range.start)
        .take(frame.event_range.len())
    {
        if r.origin != EventOrigin::Laser {
            continue;
        }
        let Some((xr, yr)) = cam_rect.get(e.x as usize, e.y as usize) else {
            continue;
        };
        let (xi, yi) = (xr.round(), yr.round());
        if xi < 0.0 || yi < 0.0 || xi >= rw as f64 || yi >= rh as f64 {
            continue;
        }
        let slot = &mut img.values[yi as usize * rw + xi as usize];
        if slot.is_nan() || r.depth < *slot {
            *slot = r.depth;
        }
    }
    Ok(img)
}
