//! JSON run configuration.
//!
//! One document drives training, detection, and evaluation; unknown keys
//! are rejected and every field has a default, so a minimal config is `{}`.
//! The defaults reproduce the sweep-optimal detector settings (see the
//! README table; a golden test pins them).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::channels::ChannelParams;
use crate::detector::DetectOptions;
use crate::error::{Error, Result};
use crate::forest::ForestParams;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub forest: ForestParams,
    pub channels: ChannelParams,
    pub detect: DetectOptions,
    pub eval: EvalConfig,
    /// Training/evaluation dataset directory.
    pub dataset: Option<PathBuf>,
    /// Output path (model file or output directory, command-dependent).
    pub output: Option<PathBuf>,
    /// Worker threads; 0 means one per core. The `SEDGE_THREADS` env var
    /// supplies a default, and `--threads` overrides both.
    pub threads: usize,
    /// Kept for config compatibility; outputs are bit-deterministic for a
    /// fixed seed and thread configuration either way.
    pub deterministic: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalConfig {
    pub n_thresholds: usize,
    /// Match tolerance as a fraction of the image diagonal.
    pub tolerance: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            n_thresholds: crate::eval::DEFAULT_THRESHOLDS,
            tolerance: crate::eval::DEFAULT_TOLERANCE,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: RunConfig = serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).expect("config serializes");
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn validate(&self) -> Result<()> {
        self.forest.validate()?;
        if self.channels.shrink == 0 || self.channels.grid_cells < 2 {
            return Err(Error::Config(
                "shrink must be >= 1 and grid_cells >= 2".into(),
            ));
        }
        if !self.forest.d_in.is_multiple_of(self.channels.shrink) {
            return Err(Error::Config("d_in must be divisible by shrink".into()));
        }
        if self.eval.n_thresholds == 0 {
            return Err(Error::Config("n_thresholds must be >= 1".into()));
        }
        if !self.eval.tolerance.is_finite() || self.eval.tolerance <= 0.0 {
            return Err(Error::Config("tolerance must be positive".into()));
        }
        Ok(())
    }
}
