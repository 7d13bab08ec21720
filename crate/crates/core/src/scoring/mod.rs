//! The scoring environment: everything between a prompt and its
//! (aesthetic, relevance, preference) scores.
//!
//! [`SyntheticWorld`] is a deterministic closed-form stand-in used for
//! desk-scale experiments; [`RemoteScorer`] forwards requests to an HTTP
//! backend that runs real generators and scorers.

mod remote;
mod synthetic;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::prompt::{parse_dfprompt, DfPrompt, PromptError};

pub use remote::{decode_score_response, RemoteScorer};
pub use synthetic::{SyntheticWorld, TokenEffect, WorldError};

#[derive(Debug, Error)]
pub enum ScoreError {
    #[error("scoring environment unavailable: {0}")]
    EnvUnavailable(String),
    #[error("scoring request timed out")]
    Timeout,
    #[error("scoring protocol violation: {0}")]
    ProtocolError(String),
    #[error("token {0:?} is unknown to the scoring world")]
    UnknownToken(String),
    #[error("invalid request prompt: {0}")]
    InvalidRequest(#[from] PromptError),
}

/// Scores for one generated sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreBundle {
    pub aes: f64,
    pub clip: f64,
    pub pick: f64,
}

impl ScoreBundle {
    pub fn is_finite(&self) -> bool {
        self.aes.is_finite() && self.clip.is_finite() && self.pick.is_finite()
    }
}

/// One (prompt, seed) sample to score. Relevance is always judged against
/// `short_prompt`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ScoreRequest {
    pub short_prompt: String,
    pub dfprompt: String,
    pub seed: u64,
    pub n_steps: u32,
}

impl ScoreRequest {
    /// Scores `prompt` with relevance measured against `short_prompt`.
    pub fn new(short_prompt: impl Into<String>, prompt: &DfPrompt, seed: u64, n_steps: u32) -> Self {
        Self { short_prompt: short_prompt.into(), dfprompt: prompt.to_string(), seed, n_steps }
    }

    /// The unmodified short prompt scored against itself.
    pub fn plain(short_prompt: impl Into<String>, seed: u64, n_steps: u32) -> Self {
        let short_prompt = short_prompt.into();
        Self { dfprompt: short_prompt.clone(), short_prompt, seed, n_steps }
    }

    pub fn parsed(&self) -> Result<DfPrompt, PromptError> {
        parse_dfprompt(&self.dfprompt)
    }
}

/// A source of scores. Implementations must accept concurrent calls.
pub trait ScoringEnv: Send + Sync {
    fn score(&self, req: &ScoreRequest) -> Result<ScoreBundle, ScoreError>;
}

impl<E: ScoringEnv + ?Sized> ScoringEnv for &E {
    fn score(&self, req: &ScoreRequest) -> Result<ScoreBundle, ScoreError> {
        (**self).score(req)
    }
}

impl<E: ScoringEnv + ?Sized> ScoringEnv for Box<E> {
    fn score(&self, req: &ScoreRequest) -> Result<ScoreBundle, ScoreError> {
        (**self).score(req)
    }
}

impl<E: ScoringEnv + ?Sized> ScoringEnv for std::sync::Arc<E> {
    fn score(&self, req: &ScoreRequest) -> Result<ScoreBundle, ScoreError> {
        (**self).score(req)
    }
}

/// Scores one request against any environment.
pub fn score(env: &dyn ScoringEnv, req: &ScoreRequest) -> Result<ScoreBundle, ScoreError> {
    env.score(req)
}
