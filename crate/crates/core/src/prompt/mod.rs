//! Dynamic fine-control prompts: a plain base prompt followed by modifier
//! triples `⟨token, effect range, weight⟩`.
//!
//! The plain-text form writes each triple as `[token : b->e : w]` after the
//! base text, e.g. `portrait of a goddess, [beauty : 0.5->0 : 0.75]`.

mod grammar;
mod split;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use grammar::{format_dfprompt, parse_dfprompt};
pub use split::{group_phrases, split_at_division};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PromptError {
    #[error("malformed bracket group at byte {position}: {reason}")]
    MalformedBracket { position: usize, reason: String },
    #[error("effect range begins before it ends: {begin}->{end}")]
    RangeOrder { begin: f64, end: f64 },
    #[error("effect range bound {value} outside [0, 1]")]
    RangeBounds { value: f64 },
    #[error("weight {value} outside (0, 2]")]
    WeightBounds { value: f64 },
    #[error("base prompt is empty")]
    EmptyBase,
    #[error("no comma to split the prompt at")]
    NoDivisionPoint,
    #[error("invalid token {token:?}: {reason}")]
    InvalidToken { token: String, reason: &'static str },
}

impl PromptError {
    /// Variant name, for diagnostics.
    pub fn kind(&self) -> &'static str {
        match self {
            PromptError::MalformedBracket { .. } => "MalformedBracket",
            PromptError::RangeOrder { .. } => "RangeOrder",
            PromptError::RangeBounds { .. } => "RangeBounds",
            PromptError::WeightBounds { .. } => "WeightBounds",
            PromptError::EmptyBase => "EmptyBase",
            PromptError::NoDivisionPoint => "NoDivisionPoint",
            PromptError::InvalidToken { .. } => "InvalidToken",
        }
    }
}

/// Normalized denoising-time interval `[begin -> end]`; `1` is the first
/// (noisiest) step and `0` the last.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EffectRange {
    begin: f64,
    end: f64,
}

impl EffectRange {
    /// Last half of the denoising trajectory.
    pub const LATE: EffectRange = EffectRange { begin: 0.5, end: 0.0 };
    /// Every step; the default for a plain modifier.
    pub const FULL: EffectRange = EffectRange { begin: 1.0, end: 0.0 };
    /// First half of the denoising trajectory.
    pub const EARLY: EffectRange = EffectRange { begin: 1.0, end: 0.5 };

    pub fn new(begin: f64, end: f64) -> Result<Self, PromptError> {
        for value in [begin, end] {
            if !(0.0..=1.0).contains(&value) {
                return Err(PromptError::RangeBounds { value });
            }
        }
        if begin < end {
            return Err(PromptError::RangeOrder { begin, end });
        }
        Ok(Self { begin, end })
    }

    pub fn begin(&self) -> f64 {
        self.begin
    }

    pub fn end(&self) -> f64 {
        self.end
    }

    /// `begin == end` covers no step at all.
    pub fn is_empty(&self) -> bool {
        self.begin == self.end
    }

    /// Half-open membership `end < t <= begin`.
    pub fn contains(&self, t: f64) -> bool {
        self.end < t && t <= self.begin
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.begin + self.end)
    }
}

impl Default for EffectRange {
    fn default() -> Self {
        Self::FULL
    }
}

impl fmt::Display for EffectRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}->{}", self.begin, self.end)
    }
}

pub const DEFAULT_WEIGHT: f64 = 1.0;

/// Checks that `weight` lies in `(0, 2]`.
pub fn check_weight(weight: f64) -> Result<f64, PromptError> {
    if weight > 0.0 && weight <= 2.0 {
        Ok(weight)
    } else {
        Err(PromptError::WeightBounds { value: weight })
    }
}

/// Checks the token alphabet: non-empty, already trimmed, no `[`, `]`, `:`
/// or line breaks.
pub fn check_token(token: &str) -> Result<(), PromptError> {
    let reason = if token.is_empty() {
        "empty"
    } else if token.trim() != token {
        "surrounding whitespace"
    } else if token.contains(['[', ']', ':']) {
        "contains a bracket or colon"
    } else if token.contains(['\n', '\r']) {
        "contains a line break"
    } else {
        return Ok(());
    };
    Err(PromptError::InvalidToken { token: token.to_string(), reason })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModifierTriple {
    token: String,
    range: EffectRange,
    weight: f64,
}

impl ModifierTriple {
    pub fn new(token: impl Into<String>, range: EffectRange, weight: f64) -> Result<Self, PromptError> {
        let token = token.into();
        check_token(&token)?;
        check_weight(weight)?;
        Ok(Self { token, range, weight })
    }

    /// A modifier with the default range `1->0` and weight `1`.
    pub fn plain(token: impl Into<String>) -> Result<Self, PromptError> {
        Self::new(token, EffectRange::FULL, DEFAULT_WEIGHT)
    }

    pub fn token(&self) -> &str {
        &self.token
    }

    pub fn range(&self) -> EffectRange {
        self.range
    }

    pub fn weight(&self) -> f64 {
        self.weight
    }

    pub(crate) fn set_range_and_weight(&mut self, range: EffectRange, weight: f64) {
        self.range = range;
        self.weight = weight;
    }
}

/// A base prompt plus its ordered modifier triples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDfPrompt", into = "RawDfPrompt")]
pub struct DfPrompt {
    base: String,
    triples: Vec<ModifierTriple>,
}

impl DfPrompt {
    /// Validates the base text: trimmed, non-empty, free of brackets and
    /// line breaks.
    pub fn new(base: impl Into<String>, triples: Vec<ModifierTriple>) -> Result<Self, PromptError> {
        let base = base.into();
        let trimmed = base.trim();
        if trimmed.is_empty() {
            return Err(PromptError::EmptyBase);
        }
        if trimmed.contains(['[', ']']) {
            return Err(PromptError::MalformedBracket {
                position: base.find(['[', ']']).unwrap_or(0),
                reason: "bracket in base text".into(),
            });
        }
        if trimmed.contains(['\n', '\r']) {
            return Err(PromptError::InvalidToken { token: base.clone(), reason: "base contains a line break" });
        }
        Ok(Self { base: trimmed.to_string(), triples })
    }

    pub fn plain(base: impl Into<String>) -> Result<Self, PromptError> {
        Self::new(base, Vec::new())
    }

    pub fn base(&self) -> &str {
        &self.base
    }

    pub fn triples(&self) -> &[ModifierTriple] {
        &self.triples
    }

    pub fn push(&mut self, triple: ModifierTriple) {
        self.triples.push(triple);
    }

    /// Base words split on whitespace.
    pub fn base_words(&self) -> impl Iterator<Item = &str> {
        self.base.split_whitespace()
    }
}

impl fmt::Display for DfPrompt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&format_dfprompt(self))
    }
}

impl std::str::FromStr for DfPrompt {
    type Err = PromptError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_dfprompt(s)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTriple {
    token: String,
    range: [f64; 2],
    weight: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDfPrompt {
    base: String,
    #[serde(default)]
    triples: Vec<RawTriple>,
}

impl TryFrom<RawDfPrompt> for DfPrompt {
    type Error = PromptError;

    fn try_from(raw: RawDfPrompt) -> Result<Self, Self::Error> {
        let triples = raw
            .triples
            .into_iter()
            .map(|t| ModifierTriple::new(t.token, EffectRange::new(t.range[0], t.range[1])?, t.weight))
            .collect::<Result<Vec<_>, _>>()?;
        DfPrompt::new(raw.base, triples)
    }
}

impl From<DfPrompt> for RawDfPrompt {
    fn from(p: DfPrompt) -> Self {
        RawDfPrompt {
            base: p.base,
            triples: p
                .triples
                .into_iter()
                .map(|t| RawTriple { token: t.token, range: [t.range.begin, t.range.end], weight: t.weight })
                .collect(),
        }
    }
}

/// The three discrete action sets a policy chooses from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionSpaces {
    vocabulary: Vec<String>,
    end_token: String,
}

impl ActionSpaces {
    /// Effect ranges in their fixed order: `0.5->0`, `1->0`, `1->0.5`.
    pub const RANGES: [EffectRange; 3] = [EffectRange::LATE, EffectRange::FULL, EffectRange::EARLY];
    pub const WEIGHTS: [f64; 5] = [0.5, 0.75, 1.0, 1.25, 1.5];
    pub const DEFAULT_RANGE_INDEX: usize = 1;
    pub const DEFAULT_WEIGHT_INDEX: usize = 2;
    pub const END_TOKEN: &'static str = "<end>";

    /// Builds the word space; the end token is appended when absent and
    /// duplicate words are dropped.
    pub fn new(words: impl IntoIterator<Item = String>, end_token: impl Into<String>) -> Result<Self, PromptError> {
        let end_token = end_token.into();
        let mut vocabulary: Vec<String> = Vec::new();
        for w in words {
            if w != end_token {
                check_token(&w)?;
            }
            if !vocabulary.contains(&w) {
                vocabulary.push(w);
            }
        }
        if !vocabulary.contains(&end_token) {
            vocabulary.push(end_token.clone());
        }
        Ok(Self { vocabulary, end_token })
    }

    pub fn vocabulary(&self) -> &[String] {
        &self.vocabulary
    }

    pub fn vocab_size(&self) -> usize {
        self.vocabulary.len()
    }

    pub fn end_token(&self) -> &str {
        &self.end_token
    }

    pub fn end_index(&self) -> usize {
        self.index_of(&self.end_token).expect("end token is in the vocabulary")
    }

    pub fn index_of(&self, word: &str) -> Option<usize> {
        self.vocabulary.iter().position(|w| w == word)
    }

    pub fn word(&self, index: usize) -> &str {
        &self.vocabulary[index]
    }

    pub fn range_index(range: EffectRange) -> Option<usize> {
        Self::RANGES.iter().position(|r| *r == range)
    }

    pub fn weight_index(weight: f64) -> Option<usize> {
        Self::WEIGHTS.iter().position(|w| *w == weight)
    }
}
