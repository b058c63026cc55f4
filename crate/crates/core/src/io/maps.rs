//! Map files: `b"XMP1"`, `u8` kind, `u32` width, `u32` height, then values
//! row-major, little-endian. Undefined cells are quiet NaN.
//!
//! | kind | contents | payload |
//! |------|----------|---------|
//! | 0 | time map | `f32` per cell |
//! | 1 | X-map (width = time columns, height = rows) | `u32` rectified grid width, then `f32` per entry |
//! | 2 | rectify map (source resolution) | `f64` x, `f64` y per pixel |

use std::io::Write;
use std::path::Path;

use crate::error::{FormatError, Result};
use crate::geometry::RectifyMap;
use crate::io::{create, read_file, Cursor};
use crate::timemap::TimeMap;
use crate::xmap::XMap;

pub const MAP_MAGIC: &[u8; 4] = b"XMP1";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum MapKind {
    TimeMap = 0,
    XMap = 1,
    RectifyMap = 2,
}

fn header(kind: MapKind, width: usize, height: usize) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAP_MAGIC);
    out.push(kind as u8);
    out.extend_from_slice(&(width as u32).to_le_bytes());
    out.extend_from_slice(&(height as u32).to_le_bytes());
    out
}

fn read_header<'a>(buf: &'a [u8], kind: MapKind) -> Result<(Cursor<'a>, usize, usize)> {
    let mut c = Cursor::new(buf);
    c.magic(MAP_MAGIC)?;
    let found = c.u8("map kind")?;
    if found != kind as u8 {
        return Err(FormatError::KindMismatch {
            expected: kind as u8,
            found,
        }
        .into());
    }
    let w = c.u32("width")? as usize;
    let h = c.u32("height")? as usize;
    Ok((c, w, h))
}

fn read_f32s(c: &mut Cursor<'_>, n: usize) -> Result<Vec<f32>> {
    let bytes = c.take(
        n.checked_mul(4)
            .ok_or_else(|| FormatError::Truncated("map size overflows".into()))?,
        "map values",
    )?;
    Ok(bytes
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes(b.try_into().expect("4 bytes")))
        .collect())
}

fn push_f32s(out: &mut Vec<u8>, values: &[f32]) {
    for v in values {
        let v = if v.is_nan() { f32::NAN } else { *v };
        out.extend_from_slice(&v.to_le_bytes());
    }
}

pub fn encode_time_map(map: &TimeMap) -> Vec<u8> {
    let mut out = header(MapKind::TimeMap, map.width(), map.height());
    push_f32s(&mut out, map.values());
    out
}

pub fn decode_time_map(buf: &[u8]) -> Result<TimeMap> {
    let (mut c, w, h) = read_header(buf, MapKind::TimeMap)?;
    let values = read_f32s(&mut c, w.saturating_mul(h))?;
    c.finish()?;
    TimeMap::from_values(w, h, values)
}

pub fn encode_xmap(map: &XMap) -> Vec<u8> {
    let mut out = header(MapKind::XMap, map.time_columns(), map.height());
    out.extend_from_slice(&(map.width() as u32).to_le_bytes());
    push_f32s(&mut out, map.entries());
    out
}

pub fn decode_xmap(buf: &[u8]) -> Result<XMap> {
    let (mut c, columns, rows) = read_header(buf, MapKind::XMap)?;
    let grid_width = c.u32("grid width")? as usize;
    let entries = read_f32s(&mut c, columns.saturating_mul(rows))?;
    c.finish()?;
    XMap::from_entries(grid_width, rows, columns, entries)
}

pub fn encode_rectify_map(map: &RectifyMap) -> Vec<u8> {
    let mut out = header(MapKind::RectifyMap, map.width, map.height);
    for [x, y] in map.coords() {
        out.extend_from_slice(&x.to_le_bytes());
        out.extend_from_slice(&y.to_le_bytes());
    }
    out
}

pub fn decode_rectify_map(buf: &[u8]) -> Result<RectifyMap> {
    let (mut c, w, h) = read_header(buf, MapKind::RectifyMap)?;
    let n = w.saturating_mul(h);
    let bytes = c.take(n.saturating_mul(16), "rectify map values")?;
    c.finish()?;
    let (mut xs, mut ys) = (Vec::with_capacity(n), Vec::with_capacity(n));
    for p in bytes.chunks_exact(16) {
        xs.push(f64::from_le_bytes(p[..8].try_into().expect("8 bytes")));
        ys.push(f64::from_le_bytes(p[8..].try_into().expect("8 bytes")));
    }
    RectifyMap::new(w, h, xs, ys)
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut w = create(path)?;
    w.write_all(bytes)?;
    w.flush()?;
    Ok(())
}

pub fn write_time_map(path: &Path, map: &TimeMap) -> Result<()> {
    write_bytes(path, &encode_time_map(map))
}

pub fn read_time_map(path: &Path) -> Result<TimeMap> {
    decode_time_map(&read_file(path)?)
}

pub fn write_xmap(path: &Path, map: &XMap) -> Result<()> {
    write_bytes(path, &encode_xmap(map))
}

pub fn read_xmap(path: &Path) -> Result<XMap> {
    decode_xmap(&read_file(path)?)
}

pub fn write_rectify_map(path: &Path, map: &RectifyMap) -> Result<()> {
    write_bytes(path, &encode_rectify_map(map))
}

pub fn read_rectify_map(path: &Path) -> Result<RectifyMap> {
    decode_rectify_map(&read_file(path)?)
}
