//! CSV sidecars: per-event depth results and simulator ground truth.
//!
//! Depth files hold any number of frames. Each frame starts with a
//! `# frame <index> <start_t> <end_t> <undefined_entry> <nonpositive_disparity>
//! <out_of_bounds> <duplicate>` line followed by its points; the file ends
//! with `# end <frames>`. Values are written in shortest round-trip form, so
//! a write/read cycle is lossless.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use crate::error::{FormatError, Result};
use crate::io::{create, read_file, terminated_lines};
use crate::simulator::{EventOrigin, GroundTruth, TruthRecord};
use crate::xmap::{DepthFrame, DepthPoint, DiscardCounts};

pub const DEPTH_HEADER: &str = "x,y,x_r,y_r,disparity,depth,t_us";
pub const TRUTH_HEADER: &str = "frame,proj_x,proj_y,depth,disparity,emitted_t,origin";

fn text_of(path: &Path) -> Result<String> {
    String::from_utf8(read_file(path)?).map_err(|e| {
        FormatError::Parse {
            line: 0,
            msg: e.to_string(),
        }
        .into()
    })
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut w = create(path)?;
    w.write_all(text.as_bytes())?;
    w.flush()?;
    Ok(())
}

fn fields<const N: usize>(line: usize, l: &str) -> Result<[&str; N], FormatError> {
    let v: Vec<&str> = l.split(',').map(str::trim).collect();
    v.try_into().map_err(|v: Vec<&str>| FormatError::Parse {
        line,
        msg: format!("expected {N} fields, found {}", v.len()),
    })
}

fn num<T: std::str::FromStr>(line: usize, s: &str) -> Result<T, FormatError> {
    s.parse().map_err(|_| FormatError::Parse {
        line,
        msg: format!("bad number {s:?}"),
    })
}

pub fn encode_depth_frames(frames: &[DepthFrame]) -> String {
    let mut s = String::new();
    s.push_str(DEPTH_HEADER);
    s.push('\n');
    for (i, f) in frames.iter().enumerate() {
        let d = &f.discards;
        let _ = writeln!(
            s,
            "# frame {i} {} {} {} {} {} {}",
            f.start_t,
            f.end_t,
            d.undefined_entry,
            d.nonpositive_disparity,
            d.out_of_bounds,
            d.duplicate
        );
        for p in &f.points {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{}",
                p.x, p.y, p.x_r, p.y_r, p.disparity, p.depth, p.t
            );
        }
    }
    let _ = writeln!(s, "# end {}", frames.len());
    s
}

pub fn decode_depth_frames(text: &str) -> Result<Vec<DepthFrame>> {
    let mut frames: Vec<DepthFrame> = Vec::new();
    let mut ended = false;
    let mut header = false;
    for (line, l) in terminated_lines(text)? {
        if ended {
            return Err(FormatError::Parse {
                line,
                msg: "content after end marker".into(),
            }
            .into());
        }
        if !header {
            if l != DEPTH_HEADER {
                return Err(FormatError::Parse {
                    line,
                    msg: format!("expected header {DEPTH_HEADER:?}"),
                }
                .into());
            }
            header = true;
            continue;
        }
        if let Some(rest) = l.strip_prefix("# frame ") {
            let v: Vec<u64> = rest
                .split_whitespace()
                .map(|x| num(line, x))
                .collect::<Result<_, _>>()?;
            if v.len() != 7 || v[0] as usize != frames.len() {
                return Err(FormatError::Parse {
                    line,
                    msg: "malformed frame line".into(),
                }
                .into());
            }
            let discards = DiscardCounts {
                undefined_entry: v[3] as usize,
                nonpositive_disparity: v[4] as usize,
                out_of_bounds: v[5] as usize,
                duplicate: v[6] as usize,
            };
            frames.push(DepthFrame {
                points: Vec::new(),
                start_t: v[1],
                end_t: v[2],
                discards,
            });
        } else if let Some(rest) = l.strip_prefix("# end ") {
            if num::<usize>(line, rest.trim())? != frames.len() {
                return Err(
                    FormatError::Truncated("frame count mismatch at end marker".into()).into(),
                );
            }
            ended = true;
        } else {
            let f = fields::<7>(line, l)?;
            let frame = frames.last_mut().ok_or_else(|| FormatError::Parse {
                line,
                msg: "point before first frame line".into(),
            })?;
            frame.points.push(DepthPoint {
                x: num(line, f[0])?,
                y: num(line, f[1])?,
                x_r: num(line, f[2])?,
                y_r: num(line, f[3])?,
                disparity: num(line, f[4])?,
                depth: num(line, f[5])?,
                t: num(line, f[6])?,
            });
        }
    }
    if !ended {
        return Err(FormatError::Truncated("missing end marker".into()).into());
    }
    Ok(frames)
}

pub fn write_depth_frames(path: &Path, frames: &[DepthFrame]) -> Result<()> {
    write_text(path, &encode_depth_frames(frames))
}

pub fn read_depth_frames(path: &Path) -> Result<Vec<DepthFrame>> {
    decode_depth_frames(&text_of(path)?)
}

fn origin_name(o: EventOrigin) -> &'static str {
    match o {
        EventOrigin::Laser => "laser",
        EventOrigin::Duplicate => "duplicate",
        EventOrigin::Negative => "negative",
    }
}

/// One row per event, parallel to the event file. Aggregate counters are
/// not stored.
pub fn encode_truth(gt: &GroundTruth) -> String {
    let mut s = String::with_capacity(64 * gt.records.len());
    let starts: Vec<String> = gt.frame_starts.iter().map(u64::to_string).collect();
    let _ = writeln!(s, "# frame_starts {}", starts.join(" "));
    s.push_str(TRUTH_HEADER);
    s.push('\n');
    for r in &gt.records {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{}",
            r.frame,
            r.proj_x,
            r.proj_y,
            r.depth,
            r.disparity,
            r.emitted_t,
            origin_name(r.origin)
        );
    }
    let _ = writeln!(s, "# count {}", gt.records.len());
    s
}

pub fn decode_truth(text: &str) -> Result<GroundTruth> {
    let mut gt = GroundTruth::default();
    let mut count = None;
    let mut header = false;
    for (line, l) in terminated_lines(text)? {
        if let Some(rest) = l.strip_prefix("# frame_starts") {
            gt.frame_starts = rest
                .split_whitespace()
                .map(|x| num(line, x))
                .collect::<Result<_, _>>()?;
            continue;
        }
        if let Some(rest) = l.strip_prefix("# count ") {
            count = Some(num::<usize>(line, rest.trim())?);
            continue;
        }
        if !header {
            if l != TRUTH_HEADER {
                return Err(FormatError::Parse {
                    line,
                    msg: format!("expected header {TRUTH_HEADER:?}"),
                }
                .into());
            }
            header = true;
            continue;
        }
        if count.is_some() {
            return Err(FormatError::Parse {
                line,
                msg: "row after count line".into(),
            }
            .into());
        }
        let f = fields::<7>(line, l)?;
        let origin = match f[6] {
            "laser" => EventOrigin::Laser,
            "duplicate" => EventOrigin::Duplicate,
            "negative" => EventOrigin::Negative,
            o => {
                return Err(FormatError::Parse {
                    line,
                    msg: format!("unknown origin {o:?}"),
                }
                .into())
            }
        };
        gt.records.push(TruthRecord {
            frame: num(line, f[0])?,
            proj_x: num(line, f[1])?,
            proj_y: num(line, f[2])?,
            depth: num(line, f[3])?,
            disparity: num(line, f[4])?,
            emitted_t: num(line, f[5])?,
            origin,
        });
    }
    if count != Some(gt.records.len()) {
        return Err(FormatError::Truncated("missing or mismatched count line".into()).into());
    }
    gt.laser_events = gt
        .records
        .iter()
        .filter(|r| r.origin == EventOrigin::Laser)
        .count();
    gt.duplicates_injected = gt
        .records
        .iter()
        .filter(|r| r.origin == EventOrigin::Duplicate)
        .count();
    gt.negatives_injected = gt
        .records
        .iter()
        .filter(|r| r.origin == EventOrigin::Negative)
        .count();
    Ok(gt)
}

pub fn write_truth(path: &Path, gt: &GroundTruth) -> Result<()> {
    write_text(path, &encode_truth(gt))
}

pub fn read_truth(path: &Path) -> Result<GroundTruth> {
    decode_truth(&text_of(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frames() -> Vec<DepthFrame> {
        let p = |x: u16, d: f64| DepthPoint {
            x,
            y: 3,
            x_r: x as f64 + 0.25,
            y_r: 3.0 / 7.0,
            disparity: d,
            depth: 50.0 / d,
            t: 17,
        };
        vec![
            DepthFrame {
                points: vec![p(1, 49.9), p(2, 51.0 / 3.0)],
                start_t: 5,
                end_t: 13_005,
                discards: DiscardCounts {
                    undefined_entry: 1,
                    nonpositive_disparity: 2,
                    out_of_bounds: 3,
                    duplicate: 4,
                },
            },
            DepthFrame::default(),
        ]
    }

    #[test]
    fn depth_round_trip_is_exact() {
        let text = encode_depth_frames(&frames());
        assert_eq!(decode_depth_frames(&text).unwrap(), frames());
        for n in 0..text.len() {
            assert!(decode_depth_frames(&text[..n]).is_err(), "prefix {n}");
        }
    }

    #[test]
    fn truth_round_trip() {
        let r = TruthRecord {
            proj_x: 3.0,
            proj_y: 1279.0,
            depth: 0.7,
            disparity: 500.0 * 0.1 / 0.7,
            emitted_t: 12.5,
            frame: 1,
            origin: EventOrigin::Laser,
        };
        let gt = GroundTruth {
            records: vec![
                r,
                TruthRecord {
                    origin: EventOrigin::Negative,
                    ..r
                },
            ],
            frame_starts: vec![0, 16_667],
            laser_events: 1,
            negatives_injected: 1,
            ..Default::default()
        };
        let text = encode_truth(&gt);
        assert_eq!(decode_truth(&text).unwrap(), gt);
        for n in 0..text.len() {
            assert!(decode_truth(&text[..n]).is_err(), "prefix {n}");
        }
    }
}
