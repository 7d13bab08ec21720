use std::io::{self, Write};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::model::{HeadMode, PolicyModel, ValueModel};
use super::ppo::{PpoConfig, PpoLearner};
use super::reference::ReferenceModel;
use super::reward::{compute_reward, RewardConfig};
use super::rollout::{rollout, KlHeads, SamplingConfig, Trajectory};
use super::PolicyError;
use crate::scalar::{stable_mean, Scalar};
use crate::scoring::ScoringEnv;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub episodes: usize,
    pub batch: usize,
    pub lr: f64,
    pub max_len: usize,
    pub temperature: f64,
    pub top_k: usize,
    /// Denoising steps requested from the scorer.
    pub n_steps: u32,
    /// Words of `s ⊕ emitted` visible to the featurizer.
    pub context_len: usize,
    pub head_mode: HeadMode,
    pub kl_heads: KlHeads,
    pub clip_epsilon: f64,
    pub beta1: f64,
    pub beta2: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            episodes: 3000,
            batch: 32,
            lr: 5e-5,
            max_len: 8,
            temperature: 0.9,
            top_k: 200,
            n_steps: 50,
            context_len: 64,
            head_mode: HeadMode::Full,
            kl_heads: KlHeads::All,
            clip_epsilon: 0.2,
            beta1: 0.9,
            beta2: 0.95,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), PolicyError> {
        let bad = |m: &str| Err(PolicyError::Config(m.to_string()));
        if self.batch == 0 {
            return bad("batch must be >= 1");
        }
        if self.max_len == 0 {
            return bad("max_len must be >= 1");
        }
        if self.n_steps == 0 {
            return bad("n_steps must be >= 1");
        }
        if self.context_len == 0 {
            return bad("context_len must be >= 1");
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad("lr must be positive");
        }
        if !(self.temperature >= 0.0 && self.temperature.is_finite()) {
            return bad("temperature must be >= 0");
        }
        if !(self.clip_epsilon > 0.0 && self.clip_epsilon.is_finite()) {
            return bad("clip_epsilon must be positive");
        }
        if !((0.0..1.0).contains(&self.beta1) && (0.0..1.0).contains(&self.beta2)) {
            return bad("adam betas must lie in [0, 1)");
        }
        Ok(())
    }

    pub fn sampling(&self) -> SamplingConfig {
        SamplingConfig { temperature: self.temperature, top_k: self.top_k }
    }

    pub fn ppo(&self, eta: f64) -> PpoConfig {
        PpoConfig {
            eta,
            clip_epsilon: self.clip_epsilon,
            kl_heads: self.kl_heads,
            lr: self.lr,
            beta1: self.beta1,
            beta2: self.beta2,
            ..PpoConfig::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeMetrics {
    pub episode: usize,
    pub mean_reward: f64,
    /// Mean per-step KL of the policy heads against their anchors.
    pub mean_kl: f64,
    pub value_loss: f64,
}

pub const METRICS_HEADER: &str = "episode,mean_reward,mean_kl,value_loss";

pub fn write_metrics_csv<W: Write>(mut out: W, metrics: &[EpisodeMetrics]) -> io::Result<()> {
    writeln!(out, "{METRICS_HEADER}")?;
    for m in metrics {
        writeln!(out, "{},{},{},{}", m.episode, m.mean_reward, m.mean_kl, m.value_loss)?;
    }
    out.flush()
}

#[derive(Debug)]
pub struct TrainOutcome<S> {
    pub policy: PolicyModel<S>,
    pub value: ValueModel<S>,
    pub metrics: Vec<EpisodeMetrics>,
    /// Set when training stopped early on a non-finite loss; the models hold
    /// the last finite parameters.
    pub halted: Option<PolicyError>,
}

/// Trains a policy initialized from `reference` on the short prompts
/// `prompts`. Each episode samples a batch of prompts, rolls the policy out
/// on each (in parallel), scores them, then runs one PPO update.
pub fn train<S: Scalar>(
    cfg: &TrainConfig,
    reward_cfg: &RewardConfig,
    reference: Arc<ReferenceModel>,
    prompts: &[String],
    env: &dyn ScoringEnv,
    seed: u64,
) -> Result<TrainOutcome<S>, PolicyError> {
    cfg.validate()?;
    reward_cfg.validate().map_err(PolicyError::Config)?;
    if prompts.is_empty() {
        return Err(PolicyError::EmptyDataset);
    }
    let mut policy = PolicyModel::<S>::from_reference(reference, cfg.context_len, cfg.head_mode);
    let mut value = ValueModel::new(*policy.featurizer());
    let mut learner = PpoLearner::new(cfg.ppo(reward_cfg.eta), &policy, &value);
    let sampling = cfg.sampling();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut metrics = Vec::with_capacity(cfg.episodes);

    for episode in 0..cfg.episodes {
        let reward_seeds: Vec<u64> = (0..reward_cfg.images_per_prompt).map(|_| rng.random()).collect();
        let jobs: Vec<(usize, u64)> = (0..cfg.batch).map(|_| (rng.random_range(0..prompts.len()), rng.random())).collect();
        let batch: Vec<Trajectory<S>> = jobs
            .par_iter()
            .map(|&(p, traj_seed)| {
                let mut traj_rng = ChaCha8Rng::seed_from_u64(traj_seed);
                let mut traj = rollout(&policy, &value, &prompts[p], cfg.max_len, &sampling, cfg.kl_heads, &mut traj_rng);
                let prompt = traj.dfprompt(policy.spaces())?;
                let r = compute_reward(&prompt, env, reward_cfg, &reward_seeds, cfg.n_steps)?;
                traj.reward = Some(S::of(r));
                Ok(traj)
            })
            .collect::<Result<_, PolicyError>>()?;

        let rewards: Vec<f64> = batch.iter().map(|t| t.reward.map_or(f64::NAN, Scalar::as_f64)).collect();
        let kls: Vec<f64> = batch.iter().flat_map(|t| t.steps.iter().map(|s| s.kl.as_f64())).collect();
        match learner.update(&mut policy, &mut value, &batch, episode) {
            Ok((_, v_loss)) => metrics.push(EpisodeMetrics {
                episode,
                mean_reward: stable_mean(&rewards),
                mean_kl: stable_mean(&kls),
                value_loss: v_loss.as_f64(),
            }),
            Err(e @ PolicyError::NonFiniteLoss { .. }) => {
                return Ok(TrainOutcome { policy, value, metrics, halted: Some(e) });
            }
            Err(e) => return Err(e),
        }
    }
    Ok(TrainOutcome { policy, value, metrics, halted: None })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::testing::uniform_reference;
    use crate::scoring::{SyntheticWorld, TokenEffect};

    fn world() -> SyntheticWorld {
        SyntheticWorld::new([
            ("good".to_string(), TokenEffect { a: 1.0, d: 0.0 }),
            ("bad".to_string(), TokenEffect { a: -0.5, d: 0.0 }),
        ])
    }

    fn small() -> TrainConfig {
        TrainConfig { episodes: 5, batch: 4, max_len: 2, ..TrainConfig::default() }
    }

    #[test]
    fn zero_episodes_returns_initial_policy() {
        let cfg = TrainConfig { episodes: 0, ..small() };
        let reference = uniform_reference(&["good", "bad"]);
        let out: TrainOutcome<f64> =
            train(&cfg, &RewardConfig::default(), reference.clone(), &["a cat".into()], &world(), 1).unwrap();
        let fresh = PolicyModel::<f64>::from_reference(reference, cfg.context_len, cfg.head_mode);
        assert_eq!(out.policy.params(), fresh.params());
        assert!(out.metrics.is_empty());
    }

    #[test]
    fn metrics_are_ordered_and_deterministic() {
        let run = || {
            train::<f64>(&small(), &RewardConfig::default(), uniform_reference(&["good", "bad"]), &["a cat".into()], &world(), 7)
                .unwrap()
                .metrics
        };
        let a = run();
        assert_eq!(a.iter().map(|m| m.episode).collect::<Vec<_>>(), [0, 1, 2, 3, 4]);
        assert_eq!(a, run());
    }

    #[test]
    fn csv_has_header_and_rows() {
        let m = [EpisodeMetrics { episode: 0, mean_reward: 1.5, mean_kl: 0.0, value_loss: 2.0 }];
        let mut buf = Vec::new();
        write_metrics_csv(&mut buf, &m).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "episode,mean_reward,mean_kl,value_loss\n0,1.5,0,2\n");
    }

    #[test]
    fn rejects_bad_config() {
        let cfg = TrainConfig { batch: 0, ..small() };
        let r = train::<f64>(&cfg, &RewardConfig::default(), uniform_reference(&["good"]), &["a".into()], &world(), 0);
        assert!(matches!(r, Err(PolicyError::Config(_))));
    }
}
