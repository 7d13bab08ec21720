use rand::Rng;
use serde::{Deserialize, Serialize};

use super::dist::{kl_from_log, sample_index, tempered};
use super::features::PromptState;
use super::model::{HeadMode, PolicyModel, ValueModel};
use crate::prompt::{ActionSpaces, DfPrompt, ModifierTriple, PromptError};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SamplingConfig {
    pub temperature: f64,
    /// Word-head truncation; capped at the vocabulary size.
    pub top_k: usize,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        Self { temperature: 0.9, top_k: 200 }
    }
}

impl SamplingConfig {
    pub fn greedy() -> Self {
        Self { temperature: 0.0, top_k: 1 }
    }
}

/// Which KL terms enter the regularizer.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KlHeads {
    Word,
    #[default]
    All,
}

/// Log-probabilities of one action under the untruncated, untempered heads.
/// `range`/`weight` are `None` when that head did not act (end token, or a
/// word-only policy).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeadLogProbs<S> {
    pub word: S,
    pub range: Option<S>,
    pub weight: Option<S>,
}

/// One sampled action. `range` and `weight` index [`ActionSpaces::RANGES`]
/// and [`ActionSpaces::WEIGHTS`]; they are meaningless when `is_end`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampledAction<S> {
    pub token: usize,
    pub range: usize,
    pub weight: usize,
    pub is_end: bool,
    pub log_probs: HeadLogProbs<S>,
}

/// A `⟨token, range, weight⟩` action as indices into the action spaces.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ActionTriple {
    pub token: usize,
    pub range: usize,
    pub weight: usize,
}

impl ActionTriple {
    pub fn to_modifier(&self, spaces: &ActionSpaces) -> Result<ModifierTriple, PromptError> {
        ModifierTriple::new(
            spaces.word(self.token),
            ActionSpaces::RANGES[self.range],
            ActionSpaces::WEIGHTS[self.weight],
        )
    }
}

/// Samples the word from the tempered top-k word head, then range and weight
/// from their tempered heads conditioned on that word.
pub fn sample_action<S: Scalar, R: Rng + ?Sized>(
    policy: &PolicyModel<S>,
    state: &PromptState,
    sampling: &SamplingConfig,
    rng: &mut R,
) -> SampledAction<S> {
    let featurizer = policy.featurizer();
    let x = featurizer.state_features(state);
    let word_logits = policy.word_logits(state, &x);
    let word_logp = super::dist::log_softmax(&word_logits);
    let top_k = Some(sampling.top_k.max(1));
    let token = sample_index(&tempered(&word_logits, sampling.temperature, top_k), rng);
    let is_end = token == policy.spaces().end_index();

    let mut action = SampledAction {
        token,
        range: ActionSpaces::DEFAULT_RANGE_INDEX,
        weight: ActionSpaces::DEFAULT_WEIGHT_INDEX,
        is_end,
        log_probs: HeadLogProbs { word: word_logp[token], range: None, weight: None },
    };
    if is_end || policy.mode() == HeadMode::WordOnly {
        return action;
    }
    let xt = featurizer.token_features(state, token);
    let range_logits = policy.range_logits(&xt);
    let weight_logits = policy.weight_logits(&xt);
    action.range = sample_index(&tempered(&range_logits, sampling.temperature, None), rng);
    action.weight = sample_index(&tempered(&weight_logits, sampling.temperature, None), rng);
    action.log_probs.range = Some(super::dist::log_softmax(&range_logits)[action.range]);
    action.log_probs.weight = Some(super::dist::log_softmax(&weight_logits)[action.weight]);
    action
}

/// KL of the policy heads against their anchors at one step: the word head
/// against the reference, and (for `KlHeads::All`, non-end steps of a full
/// policy) the range and weight heads against the smoothed labels.
pub fn kl_term<S: Scalar>(policy: &PolicyModel<S>, state: &PromptState, token: usize, heads: KlHeads) -> S {
    let reference = policy.reference_words(state);
    let mut kl = kl_from_log(&policy.word_log_probs(state), &reference);
    let decorates = token != policy.spaces().end_index() && policy.mode() == HeadMode::Full;
    if heads == KlHeads::All && decorates {
        let (lr, lw) = policy.range_weight_log_probs(state, token);
        kl += kl_from_log(&lr, policy.range_label());
        kl += kl_from_log(&lw, policy.weight_label());
    }
    kl
}

#[derive(Debug, Clone, PartialEq)]
pub struct Step<S> {
    pub action: SampledAction<S>,
    /// Value estimate of the state before this action.
    pub value: S,
    pub kl: S,
}

/// One episode: the short prompt, the actions taken and their bookkeeping.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<S> {
    pub state: PromptState,
    pub steps: Vec<Step<S>>,
    pub reward: Option<S>,
}

impl<S: Scalar> Trajectory<S> {
    pub fn short(&self) -> &str {
        self.state.short()
    }

    /// The state `s ⊕ {x_1, …, x_t}` seen before step `t`.
    pub fn state_before(&self, t: usize) -> PromptState {
        self.state.prefix(t)
    }

    /// Emitted triples, excluding a terminating end token.
    pub fn actions(&self) -> Vec<ActionTriple> {
        self.steps
            .iter()
            .filter(|s| !s.action.is_end)
            .map(|s| ActionTriple { token: s.action.token, range: s.action.range, weight: s.action.weight })
            .collect()
    }

    pub fn ended(&self) -> bool {
        self.steps.last().is_some_and(|s| s.action.is_end)
    }

    pub fn dfprompt(&self, spaces: &ActionSpaces) -> Result<DfPrompt, PromptError> {
        let triples = self.actions().iter().map(|a| a.to_modifier(spaces)).collect::<Result<_, _>>()?;
        DfPrompt::new(self.short(), triples)
    }
}

/// Runs the policy from `short` until it emits the end token or `max_len`
/// triples. The state only ever records tokens; ranges and weights live in
/// the steps.
pub fn rollout<S: Scalar, R: Rng + ?Sized>(
    policy: &PolicyModel<S>,
    value: &ValueModel<S>,
    short: &str,
    max_len: usize,
    sampling: &SamplingConfig,
    kl_heads: KlHeads,
    rng: &mut R,
) -> Trajectory<S> {
    let mut state = policy.initial_state(short);
    let mut steps = Vec::new();
    while state.emitted.len() < max_len {
        let action = sample_action(policy, &state, sampling, rng);
        let step = Step { value: value.value(&state), kl: kl_term(policy, &state, action.token, kl_heads), action };
        steps.push(step);
        if action.is_end {
            break;
        }
        state.emitted.push(action.token);
    }
    Trajectory { state, steps, reward: None }
}

/// Suggestion for `short`: actions drawn with `sampling` from a generator
/// seeded with `seed` until the end token or `max_len` triples.
pub fn suggest_dfprompt<S: Scalar>(
    policy: &PolicyModel<S>,
    short: &str,
    max_len: usize,
    sampling: &SamplingConfig,
    seed: u64,
) -> Result<DfPrompt, PromptError> {
    let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(seed);
    let mut state = policy.initial_state(short);
    let mut triples = Vec::new();
    while triples.len() < max_len {
        let a = sample_action(policy, &state, sampling, &mut rng);
        if a.is_end {
            break;
        }
        triples.push(ActionTriple { token: a.token, range: a.range, weight: a.weight }.to_modifier(policy.spaces())?);
        state.emitted.push(a.token);
    }
    DfPrompt::new(short, triples)
}

/// Argmax on every head.
pub fn greedy_dfprompt<S: Scalar>(policy: &PolicyModel<S>, short: &str, max_len: usize) -> Result<DfPrompt, PromptError> {
    suggest_dfprompt(policy, short, max_len, &SamplingConfig::greedy(), 0)
}
