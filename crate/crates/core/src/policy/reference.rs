//! Count-based modifier suggester used as the reference policy.
//!
//! Next-modifier probabilities come from additively smoothed n-gram counts
//! over the modifier sequences of the training set, backing off to shorter
//! contexts when a context was never observed. Every sequence is terminated
//! by the end token, so the model also learns when to stop.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::dist::{argmax, SmoothingConfig};
use super::PolicyError;
use crate::data::TrainingSet;
use crate::prompt::ActionSpaces;

/// Padding symbol before the first modifier.
const START: u32 = u32::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReferenceConfig {
    /// Number of preceding modifiers in a context.
    pub order: usize,
    /// Additive smoothing constant.
    pub smoothing: f64,
}

impl Default for ReferenceConfig {
    fn default() -> Self {
        Self { order: 2, smoothing: 0.1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ContextCounts {
    context: Vec<u32>,
    counts: Vec<u32>,
    total: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "ReferenceRepr", from = "ReferenceRepr")]
pub struct ReferenceModel {
    spaces: ActionSpaces,
    config: ReferenceConfig,
    label_smoothing: SmoothingConfig,
    table: HashMap<Vec<u32>, ContextCounts>,
}

#[derive(Serialize, Deserialize)]
struct ReferenceRepr {
    spaces: ActionSpaces,
    config: ReferenceConfig,
    label_smoothing: SmoothingConfig,
    contexts: Vec<ContextCounts>,
}

impl From<ReferenceModel> for ReferenceRepr {
    fn from(m: ReferenceModel) -> Self {
        let mut contexts: Vec<ContextCounts> = m.table.into_values().collect();
        contexts.sort_by(|a, b| a.context.cmp(&b.context));
        Self { spaces: m.spaces, config: m.config, label_smoothing: m.label_smoothing, contexts }
    }
}

impl From<ReferenceRepr> for ReferenceModel {
    fn from(r: ReferenceRepr) -> Self {
        let table = r.contexts.into_iter().map(|c| (c.context.clone(), c)).collect();
        Self { spaces: r.spaces, config: r.config, label_smoothing: r.label_smoothing, table }
    }
}

/// Vocabulary from the training modifiers in first-appearance order, plus
/// the end token.
pub fn vocabulary_of(data: &TrainingSet) -> Result<ActionSpaces, PolicyError> {
    let words = data.examples.iter().flat_map(|e| e.modifiers.iter().cloned());
    Ok(ActionSpaces::new(words, ActionSpaces::END_TOKEN)?)
}

/// Estimates the reference over the training set's own vocabulary.
pub fn train_reference(
    data: &TrainingSet,
    config: ReferenceConfig,
    label_smoothing: SmoothingConfig,
) -> Result<ReferenceModel, PolicyError> {
    let spaces = vocabulary_of(data)?;
    train_reference_with(data, spaces, config, label_smoothing)
}

/// Estimates the reference over a given vocabulary; every training modifier
/// must belong to it.
pub fn train_reference_with(
    data: &TrainingSet,
    spaces: ActionSpaces,
    config: ReferenceConfig,
    label_smoothing: SmoothingConfig,
) -> Result<ReferenceModel, PolicyError> {
    if data.is_empty() {
        return Err(PolicyError::EmptyDataset);
    }
    if !(config.smoothing >= 0.0 && config.smoothing.is_finite()) {
        return Err(PolicyError::Config(format!("n-gram smoothing must be >= 0, got {}", config.smoothing)));
    }
    let n = spaces.vocab_size();
    let end = spaces.end_index() as u32;
    let mut table: HashMap<Vec<u32>, ContextCounts> = HashMap::new();
    for (_, modifiers) in data.pairs() {
        let mut seq = Vec::with_capacity(modifiers.len() + 1);
        for m in modifiers {
            let i = spaces.index_of(m).ok_or_else(|| PolicyError::UnknownWord(m.clone()))?;
            seq.push(i as u32);
        }
        seq.push(end);
        let mut history: Vec<u32> = vec![START; config.order];
        for &next in &seq {
            for len in 0..=config.order {
                let ctx = history[history.len() - len..].to_vec();
                let entry = table
                    .entry(ctx.clone())
                    .or_insert_with(|| ContextCounts { context: ctx, counts: vec![0; n], total: 0 });
                entry.counts[next as usize] += 1;
                entry.total += 1;
            }
            history.push(next);
        }
    }
    Ok(ReferenceModel { spaces, config, label_smoothing, table })
}

impl ReferenceModel {
    /// A reference with no observations: uniform over the vocabulary.
    pub fn uniform(spaces: ActionSpaces, label_smoothing: SmoothingConfig) -> Self {
        Self { spaces, config: ReferenceConfig::default(), label_smoothing, table: HashMap::new() }
    }

    pub fn spaces(&self) -> &ActionSpaces {
        &self.spaces
    }

    pub fn config(&self) -> ReferenceConfig {
        self.config
    }

    pub fn label_smoothing(&self) -> SmoothingConfig {
        self.label_smoothing
    }

    /// Next-word distribution after the modifiers `emitted`.
    pub fn word_distribution(&self, emitted: &[usize]) -> Vec<f64> {
        let k = self.config.order;
        let mut history: Vec<u32> = vec![START; k.saturating_sub(emitted.len())];
        history.extend(emitted[emitted.len().saturating_sub(k)..].iter().map(|&i| i as u32));
        let n = self.spaces.vocab_size();
        let lambda = self.config.smoothing;
        for len in (0..=k).rev() {
            if let Some(c) = self.table.get(&history[history.len() - len..]).filter(|c| c.total > 0) {
                let denom = c.total as f64 + lambda * n as f64;
                return c.counts.iter().map(|&x| (x as f64 + lambda) / denom).collect();
            }
        }
        vec![1.0 / n as f64; n]
    }

    /// Default range and weight distributions: the smoothed labels.
    pub fn range_distribution(&self) -> Vec<f64> {
        self.label_smoothing.range_labels()
    }

    pub fn weight_distribution(&self) -> Vec<f64> {
        self.label_smoothing.weight_labels()
    }

    /// Most likely modifier sequence, stopping at the end token or
    /// `max_len` words.
    pub fn greedy(&self, max_len: usize) -> Vec<String> {
        let end = self.spaces.end_index();
        let mut emitted = Vec::new();
        while emitted.len() < max_len {
            let next = argmax(&self.word_distribution(&emitted));
            if next == end {
                break;
            }
            emitted.push(next);
        }
        emitted.into_iter().map(|i| self.spaces.word(i).to_string()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::TrainingExample;

    fn set(seqs: &[&[&str]]) -> TrainingSet {
        seqs.iter()
            .enumerate()
            .map(|(i, s)| TrainingExample {
                short: format!("p{i}"),
                modifiers: s.iter().map(|w| w.to_string()).collect(),
                source: i.to_string(),
                d_aes: 0.0,
                d_clip: 0.0,
            })
            .collect()
    }

    #[test]
    fn single_observation_dominates() {
        let m = train_reference(&set(&[&["artstation"]]), ReferenceConfig { order: 1, smoothing: 0.1 }, SmoothingConfig::default())
            .unwrap();
        let p = m.word_distribution(&[]);
        let a = m.spaces().index_of("artstation").unwrap();
        assert_eq!(argmax(&p), a);
    }

    #[test]
    fn unsmoothed_count_ratio() {
        let m = train_reference(
            &set(&[&["x"], &["x"], &["x"], &["y"]]),
            ReferenceConfig { order: 1, smoothing: 0.0 },
            SmoothingConfig::default(),
        )
        .unwrap();
        let p = m.word_distribution(&[]);
        assert_eq!(p[m.spaces().index_of("x").unwrap()], 0.75);
        assert_eq!(p[m.spaces().index_of("y").unwrap()], 0.25);
    }

    #[test]
    fn distributions_normalize_including_backoff() {
        let m = train_reference(
            &set(&[&["a", "b", "c"], &["b", "a"], &["c"]]),
            ReferenceConfig { order: 2, smoothing: 0.3 },
            SmoothingConfig::default(),
        )
        .unwrap();
        for ctx in [vec![], vec![0], vec![0, 1], vec![2, 2], vec![1, 0, 2, 2]] {
            let s: f64 = m.word_distribution(&ctx).iter().sum();
            assert!((s - 1.0).abs() < 1e-9, "{ctx:?}");
        }
    }

    #[test]
    fn greedy_reproduces_unique_sequence() {
        let data = set(&[&["highly", "detailed", "artstation"], &["highly", "detailed", "artstation"], &["smooth"]]);
        let m = train_reference(&data, ReferenceConfig::default(), SmoothingConfig::default()).unwrap();
        assert_eq!(m.greedy(8), ["highly", "detailed", "artstation"]);
        assert_eq!(m.greedy(2), ["highly", "detailed"]);
    }

    #[test]
    fn empty_dataset_is_rejected() {
        let r = train_reference(&TrainingSet::default(), ReferenceConfig::default(), SmoothingConfig::default());
        assert!(matches!(r, Err(PolicyError::EmptyDataset)));
    }

    #[test]
    fn serde_round_trip() {
        let m = train_reference(&set(&[&["a", "b"], &["b"]]), ReferenceConfig::default(), SmoothingConfig::default()).unwrap();
        let json = serde_json::to_string(&m).unwrap();
        let back: ReferenceModel = serde_json::from_str(&json).unwrap();
        assert_eq!(back, m);
    }
}
