//! Run configuration for the command-line tool, loadable from TOML.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dsp::StftConfig;
use crate::error::{invalid_config, invalid_input, Result};
use crate::model::{ModelConfig, Variant};
use crate::mvdr::MvdrConfig;
use crate::pipeline::stft_for;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IoPaths {
    pub input: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub variant: Variant,
    pub weights: Option<PathBuf>,
    pub stft: StftConfig,
    pub mvdr: MvdrConfig,
    pub seed: Option<u64>,
    /// Streaming block length; `None` feeds one hop at a time.
    pub chunk_seconds: Option<f64>,
    pub time_skip: bool,
    pub sample_rate: u32,
    pub paths: IoPaths,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            variant: Variant::S,
            weights: None,
            stft: StftConfig::default(),
            mvdr: MvdrConfig::default(),
            seed: None,
            chunk_seconds: None,
            time_skip: false,
            sample_rate: 16000,
            paths: IoPaths::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text)?;
        Ok(cfg)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| invalid_config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("run config serializes")
    }

    /// Model settings for `zones` microphones.
    pub fn model_config(&self, zones: usize) -> ModelConfig {
        ModelConfig::preset(self.variant)
            .with_zones(zones)
            .with_time_skip(self.time_skip)
    }

    /// Block length in samples for streaming.
    pub fn block_samples(&self) -> usize {
        match self.chunk_seconds {
            Some(s) => ((s * self.sample_rate as f64).round() as usize).max(1),
            None => self.stft.hop,
        }
    }

    /// Checks values and that referenced files exist.
    pub fn validate(&self) -> Result<()> {
        self.stft.validate()?;
        self.mvdr.validate()?;
        if self.sample_rate == 0 {
            return Err(invalid_config("sample rate must be positive"));
        }
        let preset = stft_for(&self.model_config(4), self.sample_rate)?;
        if *preset.config() != self.stft {
            return Err(invalid_config(format!(
                "STFT {:?} does not match the {:?} model ({:?})",
                self.stft,
                self.variant,
                preset.config()
            )));
        }
        if let Some(c) = self.chunk_seconds {
            if !(c > 0.0) || !c.is_finite() {
                return Err(invalid_config(format!("chunk length must be positive, got {c}")));
            }
        }
        if let Some(w) = &self.weights {
            if !w.is_file() {
                return Err(invalid_config(format!("weights file {} does not exist", w.display())));
            }
        }
        if let Some(p) = &self.paths.input {
            if !p.is_file() {
                return Err(invalid_input(format!("input {} does not exist", p.display())));
            }
        }
        Ok(())
    }
}
