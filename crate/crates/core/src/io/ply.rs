//! ASCII PLY point clouds.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::{event_to_3d, Rectification, StereoCalibration};
use crate::io::create;
use crate::xmap::DepthFrame;

/// Vertices `x y z` in metres in the camera frame, plus the event timestamp
/// `t` in microseconds.
pub fn export_ply(frame: &DepthFrame, calib: &StereoCalibration) -> Result<String> {
    if frame.is_empty() {
        return Err(Error::Empty("depth frame has no points to export".into()));
    }
    let to_cam = Rectification::new(calib)?.cam_to_rect().transpose();
    let mut s = String::with_capacity(64 * frame.len() + 160);
    s.push_str("ply\nformat ascii 1.0\ncomment xmap depth frame\n");
    let _ = writeln!(s, "element vertex {}", frame.len());
    s.push_str(
        "property double x\nproperty double y\nproperty double z\nproperty double t\nend_header\n",
    );
    for p in &frame.points {
        let q = to_cam * event_to_3d(p.x_r, p.y_r, p.disparity, calib)?.coords;
        // `+ 0.0` turns -0 into 0
        let _ = writeln!(s, "{} {} {} {}", q.x + 0.0, q.y + 0.0, q.z + 0.0, p.t);
    }
    Ok(s)
}

pub fn write_ply(path: &Path, frame: &DepthFrame, calib: &StereoCalibration) -> Result<()> {
    let text = export_ply(frame, calib)?;
    let mut w = create(path)?;
    w.write_all(text.as_bytes())?;
    w.flush()?;
    Ok(())
}
