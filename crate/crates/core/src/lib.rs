//! Prompt optimization with dynamic fine-control prompts.
//!
//! - [`prompt`]: the DF-Prompt data model and its plain-text grammar.
//! - [`conditioning`]: per-step token schedules and mean-preserving weighting.
//! - [`scoring`]: the scorer environment (synthetic world or HTTP backend).
//! - [`data`]: prompt-log splitting, confidence filtering, augmentation, JSONL.
//! - [`policy`]: reference suggester, three-headed policy, reward and PPO.
//! - [`config`]: the run configuration shared by the command-line tool.
//!
//! Numeric code is generic over [`Scalar`]; the aliases below fix it to `f64`.

pub mod conditioning;
pub mod config;
pub mod data;
pub mod policy;
pub mod prompt;
pub mod scalar;
pub mod scoring;
mod util;

pub use prompt::{ActionSpaces, DfPrompt, EffectRange, ModifierTriple, PromptError};
pub use scalar::Scalar;
pub use scoring::{ScoreBundle, ScoreError, ScoreRequest, ScoringEnv};

pub type EmbeddingMatrix = conditioning::EmbeddingMatrix<f64>;
