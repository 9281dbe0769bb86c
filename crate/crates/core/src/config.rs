//! TOML run configuration.
//!
//! ```toml
//! [protocol]
//! m = 3
//! n = 6
//! invert_bit_mapping = false
//!
//! [model]
//! loss_bit0_db = 11.0
//! loss_bit1_db = 17.0
//! visibility = 0.99
//! source_rate = 1.9e6
//! coupling_eff = 0.4
//! detector_eff = 0.9
//! dark_rate = 100.0
//!
//! [run]
//! seed = 1
//! out_dir = "out"
//! ```
//!
//! Every section and key is optional; unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::ImperfectionModel;
use crate::protocol::{BuildOptions, ProtocolParams};

pub const DEFAULT_SEED: u64 = 1;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProtocolSection {
    pub m: usize,
    pub n: usize,
    pub invert_bit_mapping: bool,
}

impl Default for ProtocolSection {
    fn default() -> Self {
        Self {
            m: 3,
            n: 6,
            invert_bit_mapping: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    pub seed: u64,
    pub out_dir: PathBuf,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            seed: DEFAULT_SEED,
            out_dir: PathBuf::from("out"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub protocol: ProtocolSection,
    pub model: ImperfectionModel,
    pub run: RunSection,
}

impl RunConfig {
    pub fn from_toml(src: &str) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(src)?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let src = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_owned(),
            source,
        })?;
        Self::from_toml(&src)
    }

    pub fn params(&self) -> Result<ProtocolParams, ConfigError> {
        ProtocolParams::new(self.protocol.m, self.protocol.n).map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    pub fn build_options(&self) -> BuildOptions {
        BuildOptions {
            invert_bit_mapping: self.protocol.invert_bit_mapping,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.params()?;
        self.model.validate().map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let c = RunConfig::from_toml("").unwrap();
        assert_eq!(c, RunConfig::default());
        assert_eq!(c.model.visibility, 0.99);
        c.validate().unwrap();
    }

    #[test]
    fn partial_sections() {
        let c = RunConfig::from_toml("[protocol]\nm = 4\n[model]\ndark_rate = 0.0\n").unwrap();
        assert_eq!((c.protocol.m, c.protocol.n), (4, 6));
        assert_eq!(c.model.dark_rate, 0.0);
        assert_eq!(c.model.loss_bit1_db, 17.0);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(RunConfig::from_toml("[model]\nvisiblity = 0.9\n").is_err());
        assert!(RunConfig::from_toml("[extra]\na = 1\n").is_err());
        assert!(RunConfig::from_toml("seed = 3\n").is_err());
    }

    #[test]
    fn invalid_values_rejected() {
        let c = RunConfig::from_toml("[protocol]\nm = 1\n").unwrap();
        assert!(c.validate().is_err());
        let c = RunConfig::from_toml("[model]\nvisibility = 1.5\n").unwrap();
        assert!(c.validate().is_err());
    }

    #[test]
    fn toml_round_trip() {
        let mut c = RunConfig::default();
        c.run.seed = 99;
        c.model.source_rate = 19000.0;
        assert_eq!(RunConfig::from_toml(&c.to_toml()).unwrap(), c);
    }
}
