//! Reference suggester, three-headed policy, value model, reward and the
//! PPO training loop.

pub mod checkpoint;
pub mod dist;
pub mod features;
pub mod model;
pub mod ppo;
pub mod reference;
pub mod reward;
pub mod rollout;
pub mod train;

use thiserror::Error;

use crate::prompt::PromptError;
use crate::scoring::ScoreError;

pub use checkpoint::Checkpoint;
pub use dist::SmoothingConfig;
pub use features::{Featurizer, PromptState};
pub use model::{HeadMode, PolicyModel, PolicyParams, ValueModel};
pub use ppo::{PpoConfig, PpoLearner};
pub use reference::{train_reference, ReferenceConfig, ReferenceModel};
pub use reward::{compute_reward, RewardConfig};
pub use rollout::{greedy_dfprompt, rollout, sample_action, suggest_dfprompt, ActionTriple, KlHeads, SamplingConfig, Trajectory};
pub use train::{train, EpisodeMetrics, TrainConfig, TrainOutcome};

#[derive(Debug, Error)]
pub enum PolicyError {
    #[error("training set is empty")]
    EmptyDataset,
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("modifier {0:?} is not in the vocabulary")]
    UnknownWord(String),
    #[error("batch is empty")]
    EmptyBatch,
    #[error("trajectory {0} has no reward")]
    Unscored(usize),
    #[error("non-finite {what} at episode {episode}: {value}")]
    NonFiniteLoss { what: &'static str, episode: usize, value: f64 },
    #[error("invalid checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Score(#[from] ScoreError),
}

#[cfg(test)]
pub(crate) mod testing {
    use std::sync::Arc;

    use super::dist::SmoothingConfig;
    use super::reference::{train_reference, ReferenceConfig, ReferenceModel};
    use crate::data::{TrainingExample, TrainingSet};
    use crate::prompt::ActionSpaces;

    pub fn uniform_reference(words: &[&str]) -> Arc<ReferenceModel> {
        let spaces = ActionSpaces::new(words.iter().map(|w| w.to_string()), ActionSpaces::END_TOKEN).unwrap();
        Arc::new(ReferenceModel::uniform(spaces, SmoothingConfig::default()))
    }

    /// Order-1 reference over single-word sequences, each repeated `count` times.
    pub fn reference_over(counts: &[(&str, usize)]) -> Arc<ReferenceModel> {
        let data: TrainingSet = counts
            .iter()
            .flat_map(|&(w, n)| std::iter::repeat_n(w, n))
            .enumerate()
            .map(|(i, w)| TrainingExample {
                short: format!("p{i}"),
                modifiers: vec![w.to_string()],
                source: i.to_string(),
                d_aes: 0.0,
                d_clip: 0.0,
            })
            .collect();
        let cfg = ReferenceConfig { order: 1, smoothing: 0.1 };
        Arc::new(train_reference(&data, cfg, SmoothingConfig::default()).unwrap())
    }
}
