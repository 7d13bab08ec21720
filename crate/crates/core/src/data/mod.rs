//! Training-data construction: split prompt logs at their division point,
//! keep the pairs whose modifiers help aesthetics without hurting relevance,
//! and persist them as JSONL.

mod augment;
mod filter;
mod jsonl;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::prompt::{split_at_division, PromptError};
use crate::scoring::ScoreError;

pub use augment::{augment, render_suffix, with_augmented_copies};
pub use filter::{confidence_score, filter_dataset, FilterConfig, FilterOutcome};
pub use jsonl::{read_jsonl, read_prompt_log, write_jsonl, LogEntry};

#[derive(Debug, Error)]
pub enum DataError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    Schema { line: usize, message: String },
    #[error(transparent)]
    Score(#[from] ScoreError),
    #[error("invalid filter configuration: {0}")]
    Config(String),
}

/// An original prompt `s'` split into short prompt `s` and modifier words.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptRecord {
    pub source: String,
    pub original: String,
    pub short: String,
    pub modifiers: Vec<String>,
}

impl PromptRecord {
    pub fn split(source: impl Into<String>, original: impl Into<String>) -> Result<Self, PromptError> {
        let original = original.into();
        let (short, modifiers) = split_at_division(&original)?;
        Ok(Self { source: source.into(), original, short, modifiers })
    }
}

/// A retained `⟨s, A⟩` pair with its provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingExample {
    pub short: String,
    pub modifiers: Vec<String>,
    pub source: String,
    /// Aesthetic delta `aes(s') - aes(s)` of the first sample.
    pub d_aes: f64,
    /// Relevance delta `clip(s, I') - clip(s, I)` of the first sample.
    pub d_clip: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainingSet {
    pub examples: Vec<TrainingExample>,
}

impl TrainingSet {
    pub fn new(examples: Vec<TrainingExample>) -> Self {
        Self { examples }
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn pairs(&self) -> impl Iterator<Item = (&str, &[String])> {
        self.examples.iter().map(|e| (e.short.as_str(), e.modifiers.as_slice()))
    }
}

impl FromIterator<TrainingExample> for TrainingSet {
    fn from_iter<I: IntoIterator<Item = TrainingExample>>(iter: I) -> Self {
        Self { examples: iter.into_iter().collect() }
    }
}
