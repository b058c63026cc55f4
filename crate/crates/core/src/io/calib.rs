//! Calibration text files: one `key = value` per line, `#` comments.
//!
//! Keys: `cam_fx cam_fy cam_cx cam_cy cam_width cam_height`, the same with a
//! `proj_` prefix, rotation `r00 .. r22` (row-major, camera to projector),
//! and translation `t0 t1 t2` in metres. Every key is required and the file
//! must end with a newline.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use nalgebra::{Matrix3, Vector3};

use crate::error::{FormatError, Result};
use crate::geometry::{PinholeIntrinsics, StereoCalibration};
use crate::io::{create, read_file, terminated_lines};

const INTRINSIC_KEYS: [&str; 6] = ["fx", "fy", "cx", "cy", "width", "height"];

pub fn encode_calibration(c: &StereoCalibration) -> String {
    let mut s = String::from("# camera-projector calibration; X_proj = R * X_cam + t\n");
    for (prefix, k) in [("cam", &c.camera), ("proj", &c.projector)] {
        let _ = writeln!(s, "{prefix}_fx = {}", k.fx);
        let _ = writeln!(s, "{prefix}_fy = {}", k.fy);
        let _ = writeln!(s, "{prefix}_cx = {}", k.cx);
        let _ = writeln!(s, "{prefix}_cy = {}", k.cy);
        let _ = writeln!(s, "{prefix}_width = {}", k.width);
        let _ = writeln!(s, "{prefix}_height = {}", k.height);
    }
    for i in 0..3 {
        for j in 0..3 {
            let _ = writeln!(s, "r{i}{j} = {}", c.rotation[(i, j)]);
        }
    }
    for i in 0..3 {
        let _ = writeln!(s, "t{i} = {}", c.translation[i]);
    }
    s
}

pub fn decode_calibration(text: &str) -> Result<StereoCalibration> {
    let mut values: HashMap<String, (usize, String)> = HashMap::new();
    for (line, l) in terminated_lines(text)? {
        let l = l.split('#').next().unwrap_or("").trim();
        if l.is_empty() {
            continue;
        }
        let (k, v) = l.split_once('=').ok_or_else(|| FormatError::Parse {
            line,
            msg: format!("expected key = value, found {l:?}"),
        })?;
        let k = k.trim().to_ascii_lowercase();
        if values
            .insert(k.clone(), (line, v.trim().to_string()))
            .is_some()
        {
            return Err(FormatError::Parse {
                line,
                msg: format!("duplicate key {k}"),
            }
            .into());
        }
    }
    let get = |key: &str| -> Result<f64, FormatError> {
        let (line, v) = values
            .get(key)
            .ok_or_else(|| FormatError::Truncated(format!("missing key {key}")))?;
        v.parse::<f64>()
            .ok()
            .filter(|x| x.is_finite())
            .ok_or_else(|| FormatError::Parse {
                line: *line,
                msg: format!("{key}: not a finite number: {v:?}"),
            })
    };
    let dim = |key: &str| -> Result<u32, FormatError> {
        let (line, v) = values
            .get(key)
            .ok_or_else(|| FormatError::Truncated(format!("missing key {key}")))?;
        v.parse::<u32>().map_err(|_| FormatError::Parse {
            line: *line,
            msg: format!("{key}: not an unsigned integer: {v:?}"),
        })
    };
    let intrinsics = |prefix: &str| -> Result<PinholeIntrinsics> {
        let f = |k: &str| get(&format!("{prefix}_{k}"));
        PinholeIntrinsics::new(
            f("fx")?,
            f("fy")?,
            f("cx")?,
            f("cy")?,
            dim(&format!("{prefix}_width"))?,
            dim(&format!("{prefix}_height"))?,
        )
    };
    let camera = intrinsics("cam")?;
    let projector = intrinsics("proj")?;
    let mut rotation = Matrix3::zeros();
    for i in 0..3 {
        for j in 0..3 {
            rotation[(i, j)] = get(&format!("r{i}{j}"))?;
        }
    }
    let translation = Vector3::new(get("t0")?, get("t1")?, get("t2")?);
    let known = |k: &str| {
        ["cam", "proj"]
            .iter()
            .any(|p| INTRINSIC_KEYS.iter().any(|i| k == format!("{p}_{i}")))
            || (k.len() == 3
                && k.starts_with('r')
                && k[1..].bytes().all(|b| (b'0'..b'3').contains(&b)))
            || matches!(k, "t0" | "t1" | "t2")
    };
    if let Some((k, (line, _))) = values.iter().find(|(k, _)| !known(k)) {
        return Err(FormatError::Parse {
            line: *line,
            msg: format!("unknown key {k}"),
        }
        .into());
    }
    StereoCalibration::new(camera, projector, rotation, translation)
}

pub fn read_calibration(path: &Path) -> Result<StereoCalibration> {
    let buf = read_file(path)?;
    let text = std::str::from_utf8(&buf).map_err(|e| FormatError::Parse {
        line: 0,
        msg: e.to_string(),
    })?;
    decode_calibration(text)
}

pub fn write_calibration(path: &Path, c: &StereoCalibration) -> Result<()> {
    let mut w = create(path)?;
    w.write_all(encode_calibration(c).as_bytes())?;
    w.flush()?;
    Ok(())
}
