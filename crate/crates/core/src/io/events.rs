//! Event files: a fixed-record little-endian binary format and a CSV form.
//!
//! Binary layout: `b"XEV1"`, `u16` sensor width, `u16` sensor height, `u64`
//! count, then `count` 16-byte records of `u64` t (µs), `u16` x, `u16` y,
//! `u8` polarity (1 positive, 0 negative), three reserved zero bytes.
//!
//! CSV: a `# sensor <width> <height>` line, the header `t_us,x,y,p`, one row
//! per event, and a closing `# count <n>` line. Files without the comment
//! lines are accepted; the sensor size then defaults to the bounding box.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use crate::error::{FormatError, Result};
use crate::event::{Event, EventStream, Polarity};
use crate::io::{create, read_file, terminated_lines, Cursor};

pub const EVENT_MAGIC: &[u8; 4] = b"XEV1";
const HEADER_LEN: usize = 16;
const RECORD_LEN: usize = 16;
pub const CSV_HEADER: &str = "t_us,x,y,p";

pub fn encode_binary(stream: &EventStream) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + RECORD_LEN * stream.len());
    out.extend_from_slice(EVENT_MAGIC);
    out.extend_from_slice(&stream.sensor_width().to_le_bytes());
    out.extend_from_slice(&stream.sensor_height().to_le_bytes());
    out.extend_from_slice(&(stream.len() as u64).to_le_bytes());
    for e in stream.events() {
        out.extend_from_slice(&e.t.to_le_bytes());
        out.extend_from_slice(&e.x.to_le_bytes());
        out.extend_from_slice(&e.y.to_le_bytes());
        out.push(matches!(e.polarity, Polarity::Positive) as u8);
        out.extend_from_slice(&[0; 3]);
    }
    out
}

pub fn decode_binary(buf: &[u8]) -> Result<EventStream> {
    let mut c = Cursor::new(buf);
    c.magic(EVENT_MAGIC)?;
    let width = c.u16("sensor width")?;
    let height = c.u16("sensor height")?;
    let count = c.u64("event count")?;
    let expected = (count as u128) * RECORD_LEN as u128;
    if expected > c.remaining() as u128 {
        return Err(FormatError::Truncated(format!(
            "header announces {count} events ({expected} bytes), {} bytes follow",
            c.remaining()
        ))
        .into());
    }
    let mut events = Vec::with_capacity(count as usize);
    for index in 0..count as usize {
        let t = c.u64("timestamp")?;
        let x = c.u16("x")?;
        let y = c.u16("y")?;
        let polarity = match c.u8("polarity")? {
            1 => Polarity::Positive,
            0 => Polarity::Negative,
            p => {
                return Err(FormatError::InvalidRecord {
                    index,
                    msg: format!("polarity byte {p}"),
                }
                .into())
            }
        };
        c.take(3, "reserved")?;
        events.push(Event { t, x, y, polarity });
    }
    c.finish()?;
    EventStream::new(width, height, events)
}

pub fn encode_csv(stream: &EventStream) -> String {
    let mut s = String::with_capacity(32 + 24 * stream.len());
    let _ = writeln!(
        s,
        "# sensor {} {}",
        stream.sensor_width(),
        stream.sensor_height()
    );
    s.push_str(CSV_HEADER);
    s.push('\n');
    for e in stream.events() {
        let _ = writeln!(
            s,
            "{},{},{},{}",
            e.t,
            e.x,
            e.y,
            matches!(e.polarity, Polarity::Positive) as u8
        );
    }
    let _ = writeln!(s, "# count {}", stream.len());
    s
}

pub fn decode_csv(text: &str) -> Result<EventStream> {
    let mut sensor: Option<(u16, u16)> = None;
    let mut count: Option<usize> = None;
    let mut header_seen = false;
    let mut events = Vec::new();
    let parse_err = |line: usize, msg: String| FormatError::Parse { line, msg };
    for (line, l) in terminated_lines(text)? {
        if let Some(comment) = l.strip_prefix('#') {
            let mut it = comment.split_whitespace();
            match it.next() {
                Some("sensor") => {
                    let mut dim = || -> Option<u16> { it.next()?.parse().ok() };
                    let (w, h) = (dim(), dim());
                    sensor = Some(
                        w.zip(h)
                            .ok_or_else(|| parse_err(line, "bad sensor line".into()))?,
                    );
                }
                Some("count") => {
                    let n = it.next().and_then(|n| n.parse().ok());
                    count = Some(n.ok_or_else(|| parse_err(line, "bad count line".into()))?);
                }
                _ => {}
            }
            continue;
        }
        if l.trim().is_empty() {
            continue;
        }
        if !header_seen {
            if l.trim() != CSV_HEADER {
                return Err(parse_err(
                    line,
                    format!("expected header {CSV_HEADER:?}, found {l:?}"),
                )
                .into());
            }
            header_seen = true;
            continue;
        }
        if count.is_some() {
            return Err(parse_err(line, "row after the closing count line".into()).into());
        }
        let fields: Vec<&str> = l.split(',').map(str::trim).collect();
        if fields.len() != 4 {
            return Err(
                parse_err(line, format!("expected 4 fields, found {}", fields.len())).into(),
            );
        }
        let num = |i: usize, what: &str| -> Result<u64, FormatError> {
            fields[i]
                .parse()
                .map_err(|_| parse_err(line, format!("bad {what} {:?}", fields[i])))
        };
        let t = num(0, "timestamp")?;
        let (x, y) = (num(1, "x")?, num(2, "y")?);
        if x > u16::MAX as u64 || y > u16::MAX as u64 {
            return Err(parse_err(line, "coordinate exceeds 16 bits".into()).into());
        }
        let polarity = match num(3, "polarity")? {
            1 => Polarity::Positive,
            0 => Polarity::Negative,
            p => return Err(parse_err(line, format!("polarity {p}")).into()),
        };
        events.push(Event {
            t,
            x: x as u16,
            y: y as u16,
            polarity,
        });
    }
    if !header_seen {
        return Err(FormatError::Truncated("missing CSV header".into()).into());
    }
    match (sensor, count) {
        (Some(_), None) => {
            return Err(FormatError::Truncated("missing closing count line".into()).into())
        }
        (_, Some(n)) if n != events.len() => {
            return Err(FormatError::Truncated(format!(
                "count line says {n} events, found {}",
                events.len()
            ))
            .into())
        }
        _ => {}
    }
    let (w, h) = sensor.unwrap_or_else(|| {
        let w = events.iter().map(|e| e.x as u32 + 1).max().unwrap_or(0);
        let h = events.iter().map(|e| e.y as u32 + 1).max().unwrap_or(0);
        (w.min(u16::MAX as u32) as u16, h.min(u16::MAX as u32) as u16)
    });
    EventStream::new(w, h, events)
}

fn is_csv(path: &Path) -> bool {
    path.extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"))
}

/// Reads events, choosing CSV for a `.csv` extension and binary otherwise.
pub fn read_events(path: &Path) -> Result<EventStream> {
    let buf = read_file(path)?;
    if is_csv(path) {
        let text = std::str::from_utf8(&buf).map_err(|e| FormatError::Parse {
            line: 0,
            msg: e.to_string(),
        })?;
        decode_csv(text)
    } else {
        decode_binary(&buf)
    }
}

pub fn write_events(path: &Path, stream: &EventStream) -> Result<()> {
    let mut w = create(path)?;
    if is_csv(path) {
        w.write_all(encode_csv(stream).as_bytes())?;
    } else {
        w.write_all(&encode_binary(stream))?;
    }
    w.flush()?;
    Ok(())
}
