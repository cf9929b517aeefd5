//! Repository-wide run configuration loaded from TOML.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::models::ModelConfig;
use crate::oracle::OracleConfig;
use crate::runtime::RuntimeConfig;
use crate::training::TrainingConfig;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("config parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub oracle: OracleConfig,
    pub model: ModelConfig,
    pub training: TrainingConfig,
    pub runtime: RuntimeConfig,
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let c: Config = toml::from_str(text)?;
        c.validate()?;
        Ok(c)
    }

    /// Defaults when `path` is `None`.
    pub fn load(path: Option<&Path>) -> Result<Self, ConfigError> {
        match path {
            None => Ok(Self::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|source| ConfigError::Io {
                    path: p.display().to_string(),
                    source,
                })?;
                Self::from_toml(&text)
            }
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.model.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.training.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.runtime.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if (self.oracle.rate_hz - self.model.control_hz).abs() > 1e-9 {
            return Err(ConfigError::Invalid(format!(
                "oracle.rate_hz {} differs from model.control_hz {}",
                self.oracle.rate_hz, self.model.control_hz
            )));
        }
        Ok(())
    }

    /// SHA-256 of the canonical (key-sorted) JSON form.
    pub fn hash(&self) -> String {
        let value = serde_json::to_value(self).expect("config serializes");
        hex::encode(Sha256::digest(value.to_string().as_bytes()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }
}
