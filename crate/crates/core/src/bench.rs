//! Per-frame latency measurement of [`depth_frame`].

use std::time::Instant;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::event::{DedupMode, Event};
use crate::geometry::{RectifyMap, StereoCalibration};
use crate::trigger::FrameSlice;
use crate::xmap::{depth_frame, XMap};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchStats {
    pub events: usize,
    pub points: usize,
    pub repetitions: usize,
    pub mean_ms: f64,
    pub std_ms: f64,
    pub min_ms: f64,
    pub max_ms: f64,
}

/// Times `repetitions` calls of [`depth_frame`] on one frame, after one
/// untimed warm-up call. Runs on the calling thread.
pub fn bench_depth_frame(
    events: &[Event],
    frame: &FrameSlice,
    xmap: &XMap,
    rect: &RectifyMap,
    calib: &StereoCalibration,
    dedup: DedupMode,
    repetitions: usize,
) -> Result<BenchStats> {
    if repetitions == 0 {
        return Err(Error::InvalidArgument(
            "need at least one repetition".into(),
        ));
    }
    let points = depth_frame(events, frame, xmap, rect, calib, dedup)?.len();
    let mut samples = Vec::with_capacity(repetitions);
    for _ in 0..repetitions {
        let start = Instant::now();
        let out = depth_frame(events, frame, xmap, rect, calib, dedup)?;
        samples.push(start.elapsed().as_secs_f64() * 1e3);
        std::hint::black_box(out);
    }
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = if samples.len() > 1 {
        samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    Ok(BenchStats {
        events: events.len(),
        points,
        repetitions,
        mean_ms: mean,
        std_ms: var.sqrt(),
        min_ms: samples.iter().copied().fold(f64::INFINITY, f64::min),
        max_ms: samples.iter().copied().fold(0.0, f64::max),
    })
}
