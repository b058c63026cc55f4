//! Pipeline configuration (TOML).
//!
//! ```toml
//! seed = 7
//!
//! [paths]
//! calibration = "rig.calib"
//! time_map = "projector.xmp"
//! xmap = "xmap.xmp"
//! events = "scan.xev"
//!
//! [trigger]
//! max_gap_us = 40
//! min_span_us = 8000
//!
//! [depth]
//! dedup = "keep_first"
//! max_disparity = 200
//! time_columns = 720
//! ```

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::event::DedupMode;
use crate::trigger::TriggerConfig;

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub calibration: Option<PathBuf>,
    pub time_map: Option<PathBuf>,
    pub xmap: Option<PathBuf>,
    pub events: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TriggerSection {
    pub max_gap_us: u64,
    pub min_span_us: u64,
    pub batch_span_us: u64,
}

impl Default for TriggerSection {
    fn default() -> Self {
        let d = TriggerConfig::default();
        Self {
            max_gap_us: d.max_intra_frame_gap,
            min_span_us: d.min_frame_span,
            batch_span_us: d.batch_span,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DepthSection {
    pub dedup: String,
    pub max_disparity: usize,
    /// Defaults to the projector width.
    pub time_columns: Option<usize>,
}

impl Default for DepthSection {
    fn default() -> Self {
        Self {
            dedup: "keep_first".into(),
            max_disparity: 200,
            time_columns: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    pub paths: Paths,
    pub trigger: TriggerSection,
    pub depth: DepthSection,
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self =
            toml::from_str(text).map_err(|e| Error::InvalidArgument(format!("config: {e}")))?;
        cfg.trigger_config()?;
        cfg.dedup_mode()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn trigger_config(&self) -> Result<TriggerConfig> {
        TriggerConfig::new(
            self.trigger.max_gap_us,
            self.trigger.min_span_us,
            self.trigger.batch_span_us,
        )
    }

    pub fn dedup_mode(&self) -> Result<DedupMode> {
        self.depth.dedup.parse()
    }

    /// Errors if any configured input path does not exist.
    pub fn check_inputs(&self) -> Result<()> {
        let p = &self.paths;
        for path in [&p.calibration, &p.time_map, &p.xmap, &p.events]
            .into_iter()
            .flatten()
        {
            if !path.exists() {
                return Err(Error::InvalidArgument(format!(
                    "configured input {} does not exist",
                    path.display()
                )));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_overrides() {
        let cfg = PipelineConfig::from_toml("").unwrap();
        assert_eq!(cfg.trigger_config().unwrap(), TriggerConfig::default());
        assert_eq!(cfg.dedup_mode().unwrap(), DedupMode::KeepFirst);
        let cfg = PipelineConfig::from_toml(
            "seed = 3\n[trigger]\nmax_gap_us = 50\n[depth]\ndedup = \"keep_all\"\n",
        )
        .unwrap();
        assert_eq!(cfg.seed, 3);
        assert_eq!(cfg.trigger_config().unwrap().max_intra_frame_gap, 50);
        assert_eq!(cfg.dedup_mode().unwrap(), DedupMode::KeepAll);
    }

    #[test]
    fn rejects_invalid() {
        assert!(PipelineConfig::from_toml("[trigger]\nmax_gap_us = 9000\n").is_err());
        assert!(PipelineConfig::from_toml("[depth]\ndedup = \"sometimes\"\n").is_err());
        assert!(PipelineConfig::from_toml("bogus = 1\n").is_err());
        let cfg = PipelineConfig::from_toml("[paths]\nevents = \"/nonexistent/x.xev\"\n").unwrap();
        assert!(cfg.check_inputs().is_err());
    }
}
