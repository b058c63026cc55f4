//! Frame segmentation from timestamp gaps, replacing a hardware sync trigger.
//!
//! While the projector scans, consecutive events are at most a few
//! microseconds apart; the reset phase between frames leaves a silent gap of
//! several milliseconds. A frame is a maximal run of events whose consecutive
//! gaps stay within `max_intra_frame_gap` and whose total span reaches
//! `min_frame_span`. Shorter runs (partial scans, noise bursts) are dropped.

use std::ops::Range;

use crate::error::{Error, Result};
use crate::event::Event;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TriggerConfig {
    /// Largest tolerated gap between consecutive events of one frame, µs.
    pub max_intra_frame_gap: u64,
    /// Shortest accepted frame, µs.
    pub min_frame_span: u64,
    /// Nominal analysis batch length for streaming use, µs.
    pub batch_span: u64,
}

impl Default for TriggerConfig {
    fn default() -> Self {
        Self {
            max_intra_frame_gap: 40,
            min_frame_span: 8000,
            batch_span: 16_667,
        }
    }
}

impl TriggerConfig {
    pub fn new(max_intra_frame_gap: u64, min_frame_span: u64, batch_span: u64) -> Result<Self> {
        let cfg = Self {
            max_intra_frame_gap,
            min_frame_span,
            batch_span,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_intra_frame_gap < self.min_frame_span && self.min_frame_span < self.batch_span {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!(
                "trigger thresholds must satisfy max_gap < min_span < batch_span, got {} / {} / {}",
                self.max_intra_frame_gap, self.min_frame_span, self.batch_span
            )))
        }
    }
}

/// One detected projector frame.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrameSlice {
    pub start_t: u64,
    pub end_t: u64,
    /// Indices into the source stream.
    pub event_range: Range<usize>,
}

impl FrameSlice {
    pub fn span(&self) -> u64 {
        self.end_t - self.start_t
    }

    pub fn len(&self) -> usize {
        self.event_range.len()
    }

    pub fn is_empty(&self) -> bool {
        self.event_range.is_empty()
    }
}

/// Batch segmentation of a time-sorted event sequence.
pub fn split_frames(events: &[Event], cfg: &TriggerConfig) -> Vec<FrameSlice> {
    let mut splitter = FrameSplitter::new(*cfg);
    let mut out = splitter.push(events);
    out.extend(splitter.finish());
    out
}

#[derive(Debug, Clone, Copy)]
struct Run {
    start_idx: usize,
    start_t: u64,
    last_t: u64,
}

/// Incremental form of [`split_frames`].
///
/// Feed consecutive batches with [`push`](Self::push); a run that is still
/// open at the end of a batch is carried into the next one. Indices in the
/// returned slices are global over everything pushed so far.
#[derive(Debug, Clone)]
pub struct FrameSplitter {
    cfg: TriggerConfig,
    consumed: usize,
    run: Option<Run>,
}

impl FrameSplitter {
    pub fn new(cfg: TriggerConfig) -> Self {
        Self {
            cfg,
            consumed: 0,
            run: None,
        }
    }

    pub fn push(&mut self, batch: &[Event]) -> Vec<FrameSlice> {
        let mut out = Vec::new();
        for (i, e) in batch.iter().enumerate() {
            let idx = self.consumed + i;
            match self.run {
                Some(ref mut run)
                    if e.t.saturating_sub(run.last_t) <= self.cfg.max_intra_frame_gap =>
                {
                    run.last_t = e.t;
                }
                _ => {
                    if let Some(done) = self.close(idx) {
                        out.push(done);
                    }
                    self.run = Some(Run {
                        start_idx: idx,
                        start_t: e.t,
                        last_t: e.t,
                    });
                }
            }
        }
        self.consumed += batch.len();
        out
    }

    /// Closes the open run, if any, at end of stream.
    pub fn finish(&mut self) -> Option<FrameSlice> {
        let end = self.consumed;
        self.close(end)
    }

    fn close(&mut self, end_idx: usize) -> Option<FrameSlice> {
        let run = self.run.take()?;
        (run.last_t - run.start_t >= self.cfg.min_frame_span).then_some(FrameSlice {
            start_t: run.start_t,
            end_t: run.last_t,
            event_range: run.start_idx..end_idx,
        })
    }
}
