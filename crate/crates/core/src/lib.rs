//! Direct depth lookup for an event camera paired with a raster-scanning
//! laser projector.
//!
//! The pipeline splits the event stream into projector frames, looks up each
//! event's projector column in a precomputed X-map indexed by rectified row
//! and normalized timestamp, and triangulates depth from the disparity.

pub mod bench;
pub mod error;
pub mod event;
pub mod geometry;
pub mod homography;
pub mod io;
pub mod metrics;
pub mod oracle;
pub mod pipeline;
pub mod scene;
pub mod simulator;
pub mod timemap;
pub mod trigger;
pub mod xmap;

pub use error::{Error, FormatError, Result};
pub use event::{DedupMode, Event, EventStream, Polarity};
pub use geometry::{PinholeIntrinsics, Rectification, RectifyMap, StereoCalibration};
pub use timemap::TimeMap;
pub use trigger::{split_frames, FrameSlice, FrameSplitter, TriggerConfig};
pub use xmap::{depth_frame, DepthFrame, DepthPoint, DiscardCounts, DiscardReason, XMap};
