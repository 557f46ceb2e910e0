//! Engine configuration, read from a TOML file.
//!
//! ```toml
//! taxonomy = "taxonomy.jsonl"
//! corpus = "corpus.jsonl"
//! index = "index"
//! alpha = 0.9
//! measure = "interest_factor"
//! delta = 1.0
//! contingency = "standard"
//! port = 8080
//!
//! [group_map]
//! Disorders = "Disease"
//!
//! [links]
//! pubmed = "https://pubmed.ncbi.nlm.nih.gov/{doc_id}"
//! ```
//!
//! Relative paths are resolved against the directory holding the file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::Deserialize;
use thiserror::Error;

use crate::cube::{Aggregator, ContingencyMode, Measure, Scorer};
use crate::facts::DEFAULT_ALPHA;
use crate::map::MapSettings;
use crate::schema::GroupMap;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("invalid configuration: {0}")]
    Toml(#[from] toml::de::Error),
    #[error("alpha must lie in [0, 1), got {0}")]
    Alpha(f64),
    #[error("delta must be finite, got {0}")]
    Delta(f64),
}

fn default_alpha() -> f64 {
    DEFAULT_ALPHA
}

fn default_delta() -> f64 {
    1.0
}

fn default_port() -> u16 {
    8080
}

fn default_ttl() -> u64 {
    30 * 60
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EngineConfig {
    pub taxonomy: PathBuf,
    pub corpus: PathBuf,
    pub index: PathBuf,
    #[serde(default)]
    pub group_map: GroupMap,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default)]
    pub measure: Measure,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default)]
    pub contingency: ContingencyMode,
    #[serde(default)]
    pub scorer: Scorer,
    #[serde(default)]
    pub aggregator: Aggregator,
    #[serde(default = "default_port")]
    pub port: u16,
    /// Idle time after which a map is discarded.
    #[serde(default = "default_ttl")]
    pub map_ttl_secs: u64,
    /// Object type → URL template; `{doc_id}` is substituted.
    #[serde(default)]
    pub links: BTreeMap<String, String>,
}

impl EngineConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    /// Parses `text`, resolving relative paths against `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self, ConfigError> {
        let mut config: EngineConfig = toml::from_str(text)?;
        for p in [&mut config.taxonomy, &mut config.corpus, &mut config.index] {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(0.0..1.0).contains(&self.alpha) {
            return Err(ConfigError::Alpha(self.alpha));
        }
        if !self.delta.is_finite() {
            return Err(ConfigError::Delta(self.delta));
        }
        Ok(())
    }

    pub fn map_settings(&self) -> MapSettings {
        MapSettings {
            measure: self.measure,
            delta: self.delta,
            contingency: self.contingency,
            scorer: self.scorer,
            aggregator: self.aggregator,
            query: None,
        }
    }

    pub fn map_ttl(&self) -> Duration {
        Duration::from_secs(self.map_ttl_secs)
    }
}
