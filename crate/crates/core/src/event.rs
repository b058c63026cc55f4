//! Event representation, stream container, and the pre-depth filters.

use crate::error::{Error, FormatError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Polarity {
    Positive,
    Negative,
}

/// A single brightness-change detection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Event {
    /// Timestamp in microseconds.
    pub t: u64,
    pub x: u16,
    pub y: u16,
    pub polarity: Polarity,
}

impl Event {
    pub fn positive(t: u64, x: u16, y: u16) -> Self {
        Self {
            t,
            x,
            y,
            polarity: Polarity::Positive,
        }
    }

    pub fn negative(t: u64, x: u16, y: u16) -> Self {
        Self {
            t,
            x,
            y,
            polarity: Polarity::Negative,
        }
    }
}

/// Time-ordered events from one sensor.
///
/// Construction validates that every event lies on the sensor and that
/// timestamps never decrease; the stream is immutable afterwards.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventStream {
    width: u16,
    height: u16,
    events: Vec<Event>,
}

impl EventStream {
    pub fn new(width: u16, height: u16, events: Vec<Event>) -> Result<Self> {
        for (index, e) in events.iter().enumerate() {
            if e.x >= width || e.y >= height {
                return Err(FormatError::EventOutOfBounds {
                    index,
                    x: e.x,
                    y: e.y,
                    width,
                    height,
                }
                .into());
            }
        }
        if let Some(i) = events.windows(2).position(|w| w[1].t < w[0].t) {
            return Err(FormatError::Unsorted {
                index: i + 1,
                prev: events[i].t,
                next: events[i + 1].t,
            }
            .into());
        }
        Ok(Self {
            width,
            height,
            events,
        })
    }

    pub fn empty(width: u16, height: u16) -> Self {
        Self {
            width,
            height,
            events: Vec::new(),
        }
    }

    // Callers guarantee the invariants (filters of an already-valid stream).
    fn from_valid(width: u16, height: u16, events: Vec<Event>) -> Self {
        debug_assert!(events.windows(2).all(|w| w[0].t <= w[1].t));
        Self {
            width,
            height,
            events,
        }
    }

    pub fn sensor_width(&self) -> u16 {
        self.width
    }

    pub fn sensor_height(&self) -> u16 {
        self.height
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn into_events(self) -> Vec<Event> {
        self.events
    }

    /// Sub-stream covering `range` of the event indices.
    pub fn slice(&self, range: std::ops::Range<usize>) -> EventStream {
        Self::from_valid(self.width, self.height, self.events[range].to_vec())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DedupMode {
    /// At most one event per pixel, the earliest.
    #[default]
    KeepFirst,
    KeepAll,
}

impl std::str::FromStr for DedupMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "keep_first" | "keep-first" | "first" => Ok(Self::KeepFirst),
            "keep_all" | "keep-all" | "all" => Ok(Self::KeepAll),
            other => Err(Error::InvalidArgument(format!(
                "unknown dedup mode {other:?}"
            ))),
        }
    }
}

pub fn filter_positive(stream: &EventStream) -> EventStream {
    let events = stream
        .events
        .iter()
        .filter(|e| e.polarity == Polarity::Positive)
        .copied()
        .collect();
    EventStream::from_valid(stream.width, stream.height, events)
}

/// Drops repeated pixel coordinates within one projected frame.
pub fn dedup_coordinates(frame_events: &EventStream, mode: DedupMode) -> EventStream {
    match mode {
        DedupMode::KeepAll => frame_events.clone(),
        DedupMode::KeepFirst => {
            let events = dedup_first(
                &frame_events.events,
                frame_events.width as usize,
                frame_events.height as usize,
            );
            EventStream::from_valid(frame_events.width, frame_events.height, events)
        }
    }
}

/// Slice form of [`dedup_coordinates`] with `KeepFirst`.
pub fn dedup_first(events: &[Event], width: usize, height: usize) -> Vec<Event> {
    let mut seen = vec![false; width * height];
    events
        .iter()
        .filter(|e| {
            let idx = e.y as usize * width + e.x as usize;
            !std::mem::replace(&mut seen[idx], true)
        })
        .copied()
        .collect()
}
