//! Synthetic event streams of a raster-scanning laser projector.
//!
//! The projector is mounted tilted by 90°: in its image, x indexes scan lines
//! and y runs along a line. Each frame sweeps lines left to right, each line
//! bottom to top, during the active part of the frame period; the remainder
//! is a silent reset. Every projector pixel's ray is intersected with the
//! scene, checked for visibility from the camera, projected, jittered, and
//! gated per camera pixel by a refractory period.

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::event::{Event, EventStream, Polarity};
use crate::geometry::{PinholeIntrinsics, Rectification, StereoCalibration};
use crate::scene::Scene;
use crate::timemap::TimeMap;
use crate::xmap::{max_time_difference, XMap};

/// Normalized scan position to normalized frame time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SpeedModel {
    Linear,
    /// `t(s) = c1 s + c2 s^2 + c3 s^3`; the coefficients must sum to one and
    /// the curve must be non-decreasing on `[0, 1]`.
    Polynomial {
        coeffs: [f64; 3],
    },
}

impl SpeedModel {
    pub fn quadratic() -> Self {
        Self::Polynomial {
            coeffs: [0.0, 1.0, 0.0],
        }
    }

    pub fn eval(&self, s: f64) -> f64 {
        match self {
            SpeedModel::Linear => s,
            SpeedModel::Polynomial { coeffs: [a, b, c] } => s * (a + s * (b + s * c)),
        }
    }

    /// Scan position reached at normalized time `t`.
    pub fn inverse(&self, t: f64) -> f64 {
        match self {
            SpeedModel::Linear => t.clamp(0.0, 1.0),
            SpeedModel::Polynomial { .. } => {
                let (mut lo, mut hi) = (0.0, 1.0);
                for _ in 0..60 {
                    let mid = 0.5 * (lo + hi);
                    if self.eval(mid) < t {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                0.5 * (lo + hi)
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let SpeedModel::Polynomial { coeffs: [a, b, c] } = self {
            if ((a + b + c) - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidArgument(
                    "speed polynomial must map 1 to 1".into(),
                ));
            }
            // Derivative a + 2b s + 3c s^2 must stay non-negative.
            let monotone = (0..=1000).all(|i| {
                let s = i as f64 / 1000.0;
                a + 2.0 * b * s + 3.0 * c * s * s >= -1e-12
            });
            if !monotone {
                return Err(Error::InvalidArgument(
                    "speed polynomial is not monotone on [0, 1]".into(),
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScanProfile {
    pub speed_model: SpeedModel,
    pub frame_rate: f64,
    /// Share of the frame period spent scanning.
    pub scan_fraction: f64,
    /// Camera pixels.
    pub x_jitter_sigma: f64,
    /// Microseconds.
    pub t_jitter_sigma: f64,
    /// Microseconds; zero disables gating. Values at or above the scan-line
    /// spacing silence whole lines on pixels that several lines cross, which
    /// can open gaps longer than the frame-trigger threshold.
    pub refractory: f64,
    /// Probability of an extra negative event after each laser event.
    pub negative_event_rate: f64,
    /// Probability of an extra positive readout duplicate after each laser event.
    pub duplicate_rate: f64,
}

impl Default for ScanProfile {
    fn default() -> Self {
        Self {
            speed_model: SpeedModel::Linear,
            frame_rate: 60.0,
            scan_fraction: 13.0 / 16.67,
            x_jitter_sigma: 0.0,
            t_jitter_sigma: 0.0,
            refractory: 10.0,
            negative_event_rate: 0.0,
            duplicate_rate: 0.0,
        }
    }
}

impl ScanProfile {
    pub fn period_us(&self) -> f64 {
        1e6 / self.frame_rate
    }

    pub fn scan_span_us(&self) -> f64 {
        self.scan_fraction * self.period_us()
    }

    /// Spacing of consecutive scan-line starts under linear speed.
    pub fn line_spacing_us(&self, lines: u32) -> f64 {
        self.scan_span_us() / lines as f64
    }

    pub fn validate(&self) -> Result<()> {
        self.speed_model.validate()?;
        let bad = |what: &str| Err(Error::InvalidArgument(format!("scan profile: {what}")));
        if self.frame_rate.is_nan() || self.frame_rate <= 0.0 {
            return bad("frame rate must be positive");
        }
        if !(self.scan_fraction > 0.0 && self.scan_fraction < 1.0) {
            return bad("scan fraction must lie in (0, 1)");
        }
        if self.x_jitter_sigma < 0.0 || self.t_jitter_sigma < 0.0 || self.refractory < 0.0 {
            return bad("jitter and refractory must be non-negative");
        }
        if !(0.0..=1.0).contains(&self.negative_event_rate)
            || !(0.0..=1.0).contains(&self.duplicate_rate)
        {
            return bad("rates must lie in [0, 1]");
        }
        if self.refractory >= self.period_us() * (1.0 - self.scan_fraction) {
            return bad("refractory period must be shorter than the reset phase");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventOrigin {
    Laser,
    Duplicate,
    Negative,
}

/// Ground truth for one emitted event.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruthRecord {
    /// Projector pixel whose laser hit produced the event.
    pub proj_x: f64,
    pub proj_y: f64,
    /// Depth along the rectified optical axis, metres.
    pub depth: f64,
    /// Rectified disparity of the lit surface point.
    pub disparity: f64,
    /// Emission time before timestamp jitter, µs.
    pub emitted_t: f64,
    pub frame: u32,
    pub origin: EventOrigin,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct GroundTruth {
    /// Parallel to the event stream.
    pub records: Vec<TruthRecord>,
    pub frame_starts: Vec<u64>,
    pub laser_events: usize,
    pub duplicates_injected: usize,
    pub negatives_injected: usize,
    /// Laser hits suppressed by the refractory period.
    pub refractory_suppressed: usize,
}

/// The rig used throughout the examples: 640x480 camera (f = 500 px), tilted
/// 1280x720 projector (720 scan lines), 10 cm baseline, projector on the
/// camera's left, optical axes parallel.
pub fn default_calibration() -> StereoCalibration {
    StereoCalibration::new(
        PinholeIntrinsics {
            fx: 500.0,
            fy: 500.0,
            cx: 320.0,
            cy: 240.0,
            width: 640,
            height: 480,
        },
        PinholeIntrinsics {
            fx: 1500.0,
            fy: 1500.0,
            cx: 360.0,
            cy: 640.0,
            width: 720,
            height: 1280,
        },
        nalgebra::Matrix3::identity(),
        Vector3::new(0.1, 0.0, 0.0),
    )
    .expect("default calibration is valid")
}

struct FrameOutput {
    events: Vec<Event>,
    truth: Vec<TruthRecord>,
    duplicates: usize,
    negatives: usize,
    suppressed: usize,
}

/// Simulates `frames` projector frames. Deterministic for a given seed.
pub fn simulate(
    scene: &Scene,
    calib: &StereoCalibration,
    profile: &ScanProfile,
    frames: u32,
    seed: u64,
) -> Result<(EventStream, GroundTruth)> {
    scene.validate()?;
    profile.validate()?;
    let rect = Rectification::new(calib)?;
    let cam = calib.camera;
    if cam.width > u16::MAX as u32 || cam.height > u16::MAX as u32 {
        return Err(Error::InvalidArgument(
            "sensor too large for 16-bit coordinates".into(),
        ));
    }
    let period = profile.period_us();
    let frame_starts: Vec<u64> = (0..frames)
        .map(|i| (i as f64 * period).round() as u64)
        .collect();

    let outputs: Vec<FrameOutput> = frame_starts
        .par_iter()
        .enumerate()
        .map(|(i, &start)| {
            simulate_frame(
                scene,
                calib,
                &rect,
                profile,
                i as u32,
                start,
                frame_seed(seed, i as u64),
            )
        })
        .collect::<Result<_>>()?;

    let mut gt = GroundTruth {
        frame_starts,
        ..Default::default()
    };
    let mut events = Vec::new();
    for out in outputs {
        gt.duplicates_injected += out.duplicates;
        gt.negatives_injected += out.negatives;
        gt.refractory_suppressed += out.suppressed;
        events.extend(out.events);
        gt.records.extend(out.truth);
    }
    gt.laser_events = gt
        .records
        .iter()
        .filter(|r| r.origin == EventOrigin::Laser)
        .count();
    let stream = EventStream::new(cam.width as u16, cam.height as u16, events)?;
    Ok((stream, gt))
}

fn frame_seed(seed: u64, frame: u64) -> u64 {
    seed ^ frame.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

fn simulate_frame(
    scene: &Scene,
    calib: &StereoCalibration,
    rect: &Rectification,
    profile: &ScanProfile,
    frame: u32,
    frame_start: u64,
    seed: u64,
) -> Result<FrameOutput> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x_noise =
        Normal::new(0.0, profile.x_jitter_sigma.max(f64::MIN_POSITIVE)).expect("finite sigma");
    let t_noise =
        Normal::new(0.0, profile.t_jitter_sigma.max(f64::MIN_POSITIVE)).expect("finite sigma");

    let cam = calib.camera;
    let proj = calib.projector;
    let (cw, ch) = (cam.width as usize, cam.height as usize);
    let (lines, line_len) = (proj.width as usize, proj.height as usize);
    let proj_center = calib.projector_center();
    let to_cam = calib.rotation.transpose();
    let fb = calib.rectified_focal * calib.baseline;
    let span = profile.scan_span_us();

    let mut last_line = vec![u32::MAX; cw * ch];
    let mut last_emit = vec![f64::NEG_INFINITY; cw * ch];
    // (t, x, y, polarity, truth)
    let mut raw: Vec<(u64, u16, u16, Polarity, TruthRecord)> = Vec::new();
    let mut out = FrameOutput {
        events: Vec::new(),
        truth: Vec::new(),
        duplicates: 0,
        negatives: 0,
        suppressed: 0,
    };

    for line in 0..lines {
        for k in 0..line_len {
            // Bottom to top along the line.
            let py = line_len - 1 - k;
            let s = (line as f64 + k as f64 / line_len as f64) / lines as f64;
            let emitted = frame_start as f64 + profile.speed_model.eval(s) * span;

            let dir = to_cam * proj.ray(line as f64, py as f64);
            let t_hit = scene.intersect(&proj_center, &dir).ok_or_else(|| {
                Error::InvalidArgument(format!(
                    "scene does not cover projector pixel ({line}, {py})"
                ))
            })?;
            let p = proj_center + t_hit * dir;
            if p.z <= 0.0 {
                return Err(Error::InvalidArgument("scene point behind camera".into()));
            }
            // Visible from the camera?
            let dist = p.norm();
            let view = p / dist;
            match scene.intersect(&Vector3::zeros(), &view) {
                Some(t) if t < dist * (1.0 - 1e-9) - 1e-9 => continue,
                _ => {}
            }
            let Some((u, v)) = cam.project(&p) else {
                continue;
            };
            let u = if profile.x_jitter_sigma > 0.0 {
                u + x_noise.sample(&mut rng)
            } else {
                u
            };
            let (xi, yi) = (u.round(), v.round());
            if xi < 0.0 || yi < 0.0 || xi >= cw as f64 || yi >= ch as f64 {
                continue;
            }
            let idx = yi as usize * cw + xi as usize;
            // One firing per pixel per laser pass.
            if last_line[idx] == line as u32 {
                continue;
            }
            last_line[idx] = line as u32;
            if profile.refractory > 0.0 && emitted - last_emit[idx] < profile.refractory {
                out.suppressed += 1;
                continue;
            }
            last_emit[idx] = emitted;

            let depth = (rect.cam_to_rect() * p).z;
            let truth = TruthRecord {
                proj_x: line as f64,
                proj_y: py as f64,
                depth,
                disparity: fb / depth,
                emitted_t: emitted,
                frame,
                origin: EventOrigin::Laser,
            };
            let jitter = if profile.t_jitter_sigma > 0.0 {
                t_noise.sample(&mut rng)
            } else {
                0.0
            };
            let t = (emitted + jitter).round().max(0.0) as u64;
            let (x, y) = (xi as u16, yi as u16);
            raw.push((t, x, y, Polarity::Positive, truth));
            if profile.duplicate_rate > 0.0 && rng.random_bool(profile.duplicate_rate) {
                let dt = rng.random_range(1..=5);
                raw.push((
                    t + dt,
                    x,
                    y,
                    Polarity::Positive,
                    TruthRecord {
                        origin: EventOrigin::Duplicate,
                        ..truth
                    },
                ));
                out.duplicates += 1;
            }
            if profile.negative_event_rate > 0.0 && rng.random_bool(profile.negative_event_rate) {
                let dt = rng.random_range(1..=20);
                raw.push((
                    t + dt,
                    x,
                    y,
                    Polarity::Negative,
                    TruthRecord {
                        origin: EventOrigin::Negative,
                        ..truth
                    },
                ));
                out.negatives += 1;
            }
        }
    }
    raw.sort_by_key(|r| r.0);
    out.events = raw
        .iter()
        .map(|&(t, x, y, polarity, _)| Event { t, x, y, polarity })
        .collect();
    out.truth = raw.into_iter().map(|r| r.4).collect();
    Ok(out)
}

/// Projector-space time map implied by a speed model, ignoring the
/// within-line position.
pub fn projector_time_map_for(speed: &SpeedModel, width: usize, height: usize) -> TimeMap {
    TimeMap::from_fn(width, height, |x, _| {
        Some(speed.eval(x as f64 / width as f64))
    })
}

/// X-map implied by a speed model and the rig geometry, evaluated directly
/// on the rectified grid without generating events or resampling a map.
pub fn ideal_xmap_for(
    speed: &SpeedModel,
    calib: &StereoCalibration,
    time_columns: usize,
) -> Result<XMap> {
    let rect = Rectification::new(calib)?;
    let proj = calib.projector;
    let w = proj.width as usize;
    if w < 2 {
        return Err(Error::InvalidArgument(
            "projector needs at least two scan lines".into(),
        ));
    }
    let (rw, rh) = calib.rectified_size();
    let (umax, vmax) = ((proj.width - 1) as f64, (proj.height - 1) as f64);
    let threshold = max_time_difference(w);
    let mut entries = vec![f32::NAN; rh * time_columns];
    entries
        .par_chunks_mut(time_columns)
        .enumerate()
        .for_each(|(y, row)| {
            let times: Vec<(usize, f64)> = (0..rw)
                .filter_map(|x| {
                    let (u, v) = rect.projector_pixel_at(x as f64, y as f64)?;
                    let inside =
                        (-1e-9..=umax + 1e-9).contains(&u) && (-1e-9..=vmax + 1e-9).contains(&v);
                    inside.then(|| (x, speed.eval(u.clamp(0.0, umax) / w as f64) as f32 as f64))
                })
                .collect();
            for (k, slot) in row.iter_mut().enumerate() {
                let t = (k as f64 + 0.5) / time_columns as f64;
                let mut best: Option<(usize, f64)> = None;
                for &(x, m) in &times {
                    let td = (t - m).abs();
                    if td <= threshold && best.is_none_or(|(_, b)| td < b) {
                        best = Some((x, td));
                    }
                }
                if let Some((x, _)) = best {
                    *slot = x as f32;
                }
            }
        });
    XMap::from_entries(rw, rh, time_columns, entries)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn speed_models() {
        let q = SpeedModel::quadratic();
        q.validate().unwrap();
        assert_eq!(q.eval(0.5), 0.25);
        assert!((q.inverse(0.25) - 0.5).abs() < 1e-12);
        assert!(SpeedModel::Polynomial {
            coeffs: [2.0, -1.0, 0.5]
        }
        .validate()
        .is_err());
        assert!(SpeedModel::Polynomial {
            coeffs: [1.5, -1.0, 0.0]
        }
        .validate()
        .is_err());
    }

    #[test]
    fn line_spacing_at_sixty_hertz() {
        let p = ScanProfile::default();
        // 23.15 µs per line over the full period, scaled by the active share.
        let nominal = 1e6 / (720.0 * 60.0);
        assert!((p.line_spacing_us(720) - nominal * 13.0 / 16.67).abs() < 1e-9);
        assert!((p.line_spacing_us(720) - 18.05).abs() < 0.01);
    }

    #[test]
    fn profile_validation() {
        assert!(ScanProfile {
            refractory: 5000.0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(ScanProfile {
            scan_fraction: 1.0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(ScanProfile {
            negative_event_rate: 1.5,
            ..Default::default()
        }
        .validate()
        .is_err());
    }
}
