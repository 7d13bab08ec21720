//! Run configuration shared by the command-line tools.
//!
//! Every section rejects unknown keys and falls back to its defaults when
//! omitted, so `{}` is a complete configuration.

use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::FilterConfig;
use crate::policy::{ReferenceConfig, RewardConfig, SmoothingConfig, TrainConfig};
use crate::scoring::{RemoteScorer, ScoreError, ScoringEnv, SyntheticWorld, WorldError};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error(transparent)]
    World(#[from] WorldError),
    #[error(transparent)]
    Score(#[from] ScoreError),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScorerKind {
    #[default]
    Synthetic,
    Remote,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScorerConfig {
    pub kind: ScorerKind,
    /// World file for the synthetic scorer, relative to the working directory.
    pub world_path: Option<PathBuf>,
    pub url: Option<String>,
    pub timeout_secs: u64,
}

impl Default for ScorerConfig {
    fn default() -> Self {
        Self { kind: ScorerKind::Synthetic, world_path: None, url: None, timeout_secs: 120 }
    }
}

impl ScorerConfig {
    pub fn synthetic(world_path: impl Into<PathBuf>) -> Self {
        Self { world_path: Some(world_path.into()), ..Self::default() }
    }

    pub fn remote(url: impl Into<String>) -> Self {
        Self { kind: ScorerKind::Remote, url: Some(url.into()), ..Self::default() }
    }

    /// Builds the scorer. A synthetic scorer without a world file scores
    /// every prompt at the world's base values.
    pub fn build(&self) -> Result<Box<dyn ScoringEnv>, ConfigError> {
        match self.kind {
            ScorerKind::Synthetic => {
                let world = match &self.world_path {
                    Some(p) => SyntheticWorld::load(p)?,
                    None => SyntheticWorld::new(std::iter::empty()),
                };
                Ok(Box::new(world))
            }
            ScorerKind::Remote => {
                let url = self.url.as_deref().ok_or_else(|| ConfigError::Invalid("remote scorer needs a url".into()))?;
                Ok(Box::new(RemoteScorer::new(url, Duration::from_secs(self.timeout_secs))?))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FilterSection {
    pub gamma: f64,
    /// Seed-paired samples per record.
    pub samples: usize,
    pub n_steps: u32,
}

impl Default for FilterSection {
    fn default() -> Self {
        let f = FilterConfig::default();
        Self { gamma: f.gamma, samples: f.seeds.len(), n_steps: f.n_steps }
    }
}

impl FilterSection {
    pub fn to_filter_config(&self, first_seed: u64) -> FilterConfig {
        FilterConfig { n_steps: self.n_steps, ..FilterConfig::with_samples(self.gamma, self.samples, first_seed) }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub scorer: ScorerConfig,
    pub reward: RewardConfig,
    pub smoothing: SmoothingConfig,
    pub filter: FilterSection,
    pub training: TrainConfig,
    pub reference: ReferenceConfig,
    pub seed: u64,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| ConfigError::Invalid(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |e: String| ConfigError::Invalid(e);
        self.reward.validate().map_err(invalid)?;
        if !(self.smoothing.sigma > 0.0 && self.smoothing.sigma.is_finite()) {
            return Err(invalid(format!("smoothing.sigma must be positive, got {}", self.smoothing.sigma)));
        }
        self.filter.to_filter_config(self.seed).validate().map_err(|e| invalid(e.to_string()))?;
        self.training.validate().map_err(|e| invalid(e.to_string()))?;
        if !(self.reference.smoothing >= 0.0 && self.reference.smoothing.is_finite()) {
            return Err(invalid("reference.smoothing must be >= 0".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_object_gives_defaults() {
        let cfg = RunConfig::from_json("{}").unwrap();
        assert_eq!(cfg, RunConfig::default());
        assert_eq!(cfg.reward.zeta, 0.28);
        assert_eq!(cfg.smoothing.sigma, 0.5);
        assert_eq!(cfg.filter.gamma, 0.01);
        assert_eq!(cfg.filter.samples, 1);
        assert_eq!((cfg.training.episodes, cfg.training.batch, cfg.training.lr), (3000, 32, 5e-5));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(RunConfig::from_json(r#"{"rewards": {}}"#).is_err());
        assert!(RunConfig::from_json(r#"{"reward": {"zeta": 0.3, "gama": 1}}"#).is_err());
        assert!(RunConfig::from_json(r#"{"training": {"episode": 1}}"#).is_err());
    }

    #[test]
    fn json_round_trip() {
        let mut cfg = RunConfig { scorer: ScorerConfig::synthetic("world.json"), seed: 11, ..RunConfig::default() };
        cfg.training.episodes = 7;
        assert_eq!(RunConfig::from_json(&cfg.to_json()).unwrap(), cfg);
    }

    #[test]
    fn invalid_values_are_rejected() {
        assert!(RunConfig::from_json(r#"{"smoothing": {"sigma": 0}}"#).is_err());
        assert!(RunConfig::from_json(r#"{"reward": {"images_per_prompt": 0}}"#).is_err());
        assert!(RunConfig::from_json(r#"{"filter": {"samples": 0}}"#).is_err());
    }

    #[test]
    fn remote_without_url_fails_to_build() {
        let cfg = ScorerConfig { kind: ScorerKind::Remote, ..ScorerConfig::default() };
        assert!(matches!(cfg.build(), Err(ConfigError::Invalid(_))));
    }
}
