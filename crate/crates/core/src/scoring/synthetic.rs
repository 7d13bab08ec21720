use std::collections::BTreeMap;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{ScoreBundle, ScoreError, ScoreRequest, ScoringEnv};
use crate::prompt::{ActionSpaces, EffectRange, ModifierTriple};
use crate::util::fnv1a;

/// Latent effect of one modifier token: aesthetic gain `a` and semantic
/// drift `d` per unit of weight and range multiplier.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TokenEffect {
    pub a: f64,
    #[serde(default)]
    pub d: f64,
}

#[derive(Debug, Error)]
pub enum WorldError {
    #[error("reading world file: {0}")]
    Io(#[from] std::io::Error),
    #[error("world file schema: {0}")]
    Schema(#[from] serde_json::Error),
    #[error("invalid world: {0}")]
    Invalid(String),
}

/// Closed-form scoring world:
///
/// ```text
/// aes  = base_aes  + Σ w·r(τ)·a(x) + noise
/// clip = base_clip − Σ w·r(τ)·d(x) + noise        (clamped to [-1, 1])
/// pick = p0 + c1·(aes − base_aes) + c2·(clip − base_clip) + noise
/// ```
///
/// Words of the request's base text that follow the short prompt count as
/// modifiers with range `1->0` and weight 1, so plain refined prompts score
/// the same as their default-triple form. Noise is Gaussian with standard
/// deviation `noise_scale`, drawn from a generator keyed on the whole request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticWorld {
    pub tokens: BTreeMap<String, TokenEffect>,
    /// Multipliers for `0.5->0`, `1->0`, `1->0.5`.
    #[serde(default = "default_range_multipliers")]
    pub range_multipliers: [f64; 3],
    #[serde(default)]
    pub noise_scale: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_base_aes")]
    pub base_aes: f64,
    #[serde(default = "default_base_clip")]
    pub base_clip: f64,
    #[serde(default = "default_p0")]
    pub p0: f64,
    #[serde(default = "default_c1")]
    pub c1: f64,
    #[serde(default = "default_c2")]
    pub c2: f64,
}

fn default_range_multipliers() -> [f64; 3] {
    [1.1, 1.0, 0.8]
}
fn default_base_aes() -> f64 {
    5.58
}
fn default_base_clip() -> f64 {
    0.30
}
fn default_p0() -> f64 {
    19.0
}
fn default_c1() -> f64 {
    1.5
}
fn default_c2() -> f64 {
    10.0
}

impl SyntheticWorld {
    /// A noise-free world with default constants.
    pub fn new(tokens: impl IntoIterator<Item = (String, TokenEffect)>) -> Self {
        Self {
            tokens: tokens.into_iter().collect(),
            range_multipliers: default_range_multipliers(),
            noise_scale: 0.0,
            seed: 0,
            base_aes: default_base_aes(),
            base_clip: default_base_clip(),
            p0: default_p0(),
            c1: default_c1(),
            c2: default_c2(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self, WorldError> {
        let world: Self = serde_json::from_str(text)?;
        world.validate()?;
        Ok(world)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, WorldError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("world serializes")
    }

    pub fn validate(&self) -> Result<(), WorldError> {
        let constants = [self.noise_scale, self.base_aes, self.base_clip, self.p0, self.c1, self.c2];
        if constants.iter().chain(&self.range_multipliers).any(|x| !x.is_finite()) {
            return Err(WorldError::Invalid("non-finite constant".into()));
        }
        if self.noise_scale < 0.0 {
            return Err(WorldError::Invalid("noise_scale must be >= 0".into()));
        }
        for (token, e) in &self.tokens {
            if !e.a.is_finite() || !e.d.is_finite() || e.d < 0.0 {
                return Err(WorldError::Invalid(format!("token {token:?} needs finite a and d >= 0")));
            }
        }
        Ok(())
    }

    /// Multiplier for an effect range. Ranges outside the action space use
    /// the nearest member (L1 distance on the endpoints, ties to `1->0`);
    /// empty ranges inject nothing.
    pub fn range_multiplier(&self, range: EffectRange) -> f64 {
        if range.is_empty() {
            return 0.0;
        }
        if let Some(i) = ActionSpaces::range_index(range) {
            return self.range_multipliers[i];
        }
        let dist = |r: &EffectRange| (r.begin() - range.begin()).abs() + (r.end() - range.end()).abs();
        let nearest = (0..3)
            .min_by(|&i, &j| {
                let (di, dj) = (dist(&ActionSpaces::RANGES[i]), dist(&ActionSpaces::RANGES[j]));
                di.total_cmp(&dj)
                    .then_with(|| (i != ActionSpaces::DEFAULT_RANGE_INDEX).cmp(&(j != ActionSpaces::DEFAULT_RANGE_INDEX)))
            })
            .expect("three ranges");
        self.range_multipliers[nearest]
    }

    fn effect(&self, token: &str) -> Result<TokenEffect, ScoreError> {
        self.tokens.get(token).copied().ok_or_else(|| ScoreError::UnknownToken(token.to_string()))
    }

    /// Noise-free (aesthetic gain, relevance drift) of a request.
    pub fn modifier_effect(&self, req: &ScoreRequest) -> Result<(f64, f64), ScoreError> {
        let prompt = req.parsed()?;
        let short = req.short_prompt.trim();
        let mut implicit = Vec::new();
        let suffix = prompt
            .base()
            .strip_prefix(short)
            .filter(|rest| !short.is_empty() && rest.starts_with(|c: char| c.is_whitespace() || c == ',' || c == '.'));
        if let Some(rest) = suffix {
            for word in rest.split(|c: char| c.is_whitespace() || c == ',' || c == '.') {
                if !word.is_empty() {
                    implicit.push(ModifierTriple::plain(word)?);
                }
            }
        }
        let mut gain = 0.0;
        let mut drift = 0.0;
        for t in implicit.iter().chain(prompt.triples()) {
            let e = self.effect(t.token())?;
            let k = t.weight() * self.range_multiplier(t.range());
            gain += k * e.a;
            drift += k * e.d;
        }
        Ok((gain, drift))
    }

    fn noise(&self, req: &ScoreRequest) -> [f64; 3] {
        if self.noise_scale == 0.0 {
            return [0.0; 3];
        }
        let key = fnv1a(&[
            &self.seed.to_le_bytes(),
            req.short_prompt.as_bytes(),
            req.dfprompt.as_bytes(),
            &req.seed.to_le_bytes(),
            &req.n_steps.to_le_bytes(),
        ]);
        let mut rng = ChaCha8Rng::seed_from_u64(key);
        let normal = Normal::new(0.0, self.noise_scale).expect("validated noise scale");
        [normal.sample(&mut rng), normal.sample(&mut rng), normal.sample(&mut rng)]
    }

    pub fn synth_score(&self, req: &ScoreRequest) -> Result<ScoreBundle, ScoreError> {
        let (gain, drift) = self.modifier_effect(req)?;
        let [n_aes, n_clip, n_pick] = self.noise(req);
        let aes = self.base_aes + gain + n_aes;
        let clip = (self.base_clip - drift + n_clip).clamp(-1.0, 1.0);
        let pick = self.p0 + self.c1 * (aes - self.base_aes) + self.c2 * (clip - self.base_clip) + n_pick;
        Ok(ScoreBundle { aes, clip, pick })
    }
}

impl ScoringEnv for SyntheticWorld {
    fn score(&self, req: &ScoreRequest) -> Result<ScoreBundle, ScoreError> {
        self.synth_score(req)
    }
}
