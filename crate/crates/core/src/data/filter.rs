use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{DataError, PromptRecord, TrainingExample, TrainingSet};
use crate::scoring::{ScoreRequest, ScoringEnv};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FilterConfig {
    /// Relevance tolerance added to the CLIP delta.
    pub gamma: f64,
    /// One sample per seed; `K = seeds.len()`.
    pub seeds: Vec<u64>,
    pub n_steps: u32,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self { gamma: 0.01, seeds: vec![0], n_steps: 50 }
    }
}

impl FilterConfig {
    /// `samples` consecutive seeds starting at `first_seed`.
    pub fn with_samples(gamma: f64, samples: usize, first_seed: u64) -> Self {
        Self { gamma, seeds: (0..samples as u64).map(|k| first_seed + k).collect(), ..Self::default() }
    }

    pub fn samples(&self) -> usize {
        self.seeds.len()
    }

    pub fn validate(&self) -> Result<(), DataError> {
        if self.seeds.is_empty() {
            return Err(DataError::Config("at least one sample seed is required".into()));
        }
        if !(self.gamma.is_finite() && self.gamma >= 0.0) {
            return Err(DataError::Config(format!("gamma must be finite and >= 0, got {}", self.gamma)));
        }
        Ok(())
    }
}

/// Score and first-sample deltas of one record.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterOutcome {
    pub score: f64,
    pub d_aes: f64,
    pub d_clip: f64,
}

fn step(z: f64) -> f64 {
    if z > 0.0 {
        1.0
    } else {
        0.0
    }
}

fn evaluate(original: &str, short: &str, env: &dyn ScoringEnv, cfg: &FilterConfig) -> Result<FilterOutcome, DataError> {
    let mut hits = 0.0;
    let mut first = None;
    for &seed in &cfg.seeds {
        let refined = env.score(&ScoreRequest {
            short_prompt: short.to_string(),
            dfprompt: original.to_string(),
            seed,
            n_steps: cfg.n_steps,
        })?;
        let plain = env.score(&ScoreRequest::plain(short, seed, cfg.n_steps))?;
        let d_aes = refined.aes - plain.aes;
        let d_clip = refined.clip - plain.clip;
        hits += step(d_aes) * step(d_clip + cfg.gamma);
        first.get_or_insert((d_aes, d_clip));
    }
    let (d_aes, d_clip) = first.expect("validated non-empty seeds");
    Ok(FilterOutcome { score: hits / cfg.seeds.len() as f64, d_aes, d_clip })
}

/// Fraction of seed-paired samples in which the refined prompt `original`
/// beats `short` on aesthetics while keeping relevance within `gamma`.
///
/// Both images of a pair share the seed, and relevance is measured against
/// the short prompt for both.
pub fn confidence_score(original: &str, short: &str, env: &dyn ScoringEnv, cfg: &FilterConfig) -> Result<f64, DataError> {
    cfg.validate()?;
    Ok(evaluate(original, short, env, cfg)?.score)
}

/// Keeps the records with a positive confidence score, in input order.
pub fn filter_dataset(records: &[PromptRecord], env: &dyn ScoringEnv, cfg: &FilterConfig) -> Result<TrainingSet, DataError> {
    cfg.validate()?;
    let outcomes = records
        .par_iter()
        .map(|r| evaluate(&r.original, &r.short, env, cfg))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(records
        .iter()
        .zip(outcomes)
        .filter(|(_, o)| o.score > 0.0)
        .map(|(r, o)| TrainingExample {
            short: r.short.clone(),
            modifiers: r.modifiers.clone(),
            source: r.source.clone(),
            d_aes: o.d_aes,
            d_clip: o.d_clip,
        })
        .collect())
}
