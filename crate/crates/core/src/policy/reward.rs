use serde::{Deserialize, Serialize};

use crate::prompt::DfPrompt;
use crate::scoring::{ScoreBundle, ScoreError, ScoreRequest, ScoringEnv};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RewardConfig {
    /// CLIP threshold below which relevance is penalized.
    pub zeta: f64,
    /// PickScore threshold below which preference is penalized.
    pub kappa: f64,
    pub alpha: f64,
    /// Weight of the plain prompt's aesthetic score as a baseline.
    pub beta: f64,
    /// KL coefficient.
    pub eta: f64,
    pub images_per_prompt: usize,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self { zeta: 0.28, kappa: 18.0, alpha: 1.0, beta: 0.0, eta: 0.02, images_per_prompt: 2 }
    }
}

impl RewardConfig {
    pub fn validate(&self) -> Result<(), String> {
        let all = [self.zeta, self.kappa, self.alpha, self.beta, self.eta];
        if all.iter().any(|x| !x.is_finite()) {
            return Err("reward constants must be finite".into());
        }
        if self.images_per_prompt == 0 {
            return Err("images_per_prompt must be >= 1".into());
        }
        Ok(())
    }
}

/// Reward of one sample:
/// `min(clip − ζ, 0) + min(pick − κ, 0) + α·(aes − β·aes_plain)`.
///
/// `plain` is only consulted when `β ≠ 0`.
pub fn sample_reward(refined: &ScoreBundle, plain: Option<&ScoreBundle>, cfg: &RewardConfig) -> f64 {
    let clip_term = (refined.clip - cfg.zeta).min(0.0);
    let pick_term = (refined.pick - cfg.kappa).min(0.0);
    let baseline = if cfg.beta == 0.0 { 0.0 } else { cfg.beta * plain.map_or(0.0, |p| p.aes) };
    clip_term + pick_term + cfg.alpha * (refined.aes - baseline)
}

/// Mean sample reward over `seeds`, scoring `prompt` (and, when `β ≠ 0`, the
/// plain short prompt with the same seed).
pub fn compute_reward(
    prompt: &DfPrompt,
    env: &dyn ScoringEnv,
    cfg: &RewardConfig,
    seeds: &[u64],
    n_steps: u32,
) -> Result<f64, ScoreError> {
    assert!(!seeds.is_empty(), "reward needs at least one seed");
    let short = prompt.base();
    let mut total = 0.0;
    for &seed in seeds {
        let refined = env.score(&ScoreRequest::new(short, prompt, seed, n_steps))?;
        let plain = if cfg.beta != 0.0 { Some(env.score(&ScoreRequest::plain(short, seed, n_steps))?) } else { None };
        total += sample_reward(&refined, plain.as_ref(), cfg);
    }
    Ok(total / seeds.len() as f64)
}
