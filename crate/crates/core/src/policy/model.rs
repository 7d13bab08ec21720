use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::dist::{log_softmax, KL_EPSILON};
use super::features::{add_matvec, Featurizer, PromptState, SparseFeatures};
use super::reference::ReferenceModel;
use crate::prompt::ActionSpaces;
use crate::scalar::Scalar;

/// Which heads the policy controls.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeadMode {
    /// Word, range and weight are all sampled.
    #[default]
    Full,
    /// Only the word is sampled; range and weight stay at `1->0` and 1.
    WordOnly,
}

/// Trainable residual weights, one row-major `rows × dim` matrix per head.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyParams<S> {
    pub word: Vec<S>,
    pub range: Vec<S>,
    pub weight: Vec<S>,
}

impl<S: Scalar> PolicyParams<S> {
    pub fn zeros(vocab_size: usize, dim: usize) -> Self {
        Self {
            word: vec![S::zero(); vocab_size * dim],
            range: vec![S::zero(); ActionSpaces::RANGES.len() * dim],
            weight: vec![S::zero(); ActionSpaces::WEIGHTS.len() * dim],
        }
    }

    pub fn len(&self) -> usize {
        self.word.len() + self.range.len() + self.weight.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn to_flat(&self) -> Vec<S> {
        let mut v = Vec::with_capacity(self.len());
        v.extend_from_slice(&self.word);
        v.extend_from_slice(&self.range);
        v.extend_from_slice(&self.weight);
        v
    }

    /// Inverse of [`to_flat`](Self::to_flat) for the same shapes.
    pub fn copy_from_flat(&mut self, flat: &[S]) {
        assert_eq!(flat.len(), self.len());
        let (w, rest) = flat.split_at(self.word.len());
        let (r, g) = rest.split_at(self.range.len());
        self.word.copy_from_slice(w);
        self.range.copy_from_slice(r);
        self.weight.copy_from_slice(g);
    }

    pub fn is_finite(&self) -> bool {
        self.word.iter().chain(&self.range).chain(&self.weight).all(|x| x.is_finite())
    }
}

/// Three-headed policy over words, effect ranges and weights.
///
/// Each head's logits are a fixed prior plus a learned linear residual on the
/// state features. The word prior is the log of the reference suggester's
/// conditional distribution and the range/weight priors are the logs of the
/// Gaussian-smoothed default labels, so a zero residual reproduces the
/// reference exactly in distribution.
#[derive(Debug, Clone)]
pub struct PolicyModel<S> {
    reference: Arc<ReferenceModel>,
    featurizer: Featurizer,
    range_label: Vec<S>,
    weight_label: Vec<S>,
    params: PolicyParams<S>,
    mode: HeadMode,
}

impl<S: Scalar> PolicyModel<S> {
    pub fn from_reference(reference: Arc<ReferenceModel>, context_len: usize, mode: HeadMode) -> Self {
        let featurizer = Featurizer::new(reference.spaces().vocab_size(), context_len);
        let params = PolicyParams::zeros(featurizer.vocab_size, featurizer.dim());
        Self {
            range_label: reference.range_distribution().into_iter().map(S::of).collect(),
            weight_label: reference.weight_distribution().into_iter().map(S::of).collect(),
            reference,
            featurizer,
            params,
            mode,
        }
    }

    pub fn reference(&self) -> &ReferenceModel {
        &self.reference
    }

    pub fn reference_arc(&self) -> Arc<ReferenceModel> {
        Arc::clone(&self.reference)
    }

    pub fn spaces(&self) -> &ActionSpaces {
        self.reference.spaces()
    }

    pub fn featurizer(&self) -> &Featurizer {
        &self.featurizer
    }

    pub fn mode(&self) -> HeadMode {
        self.mode
    }

    pub fn params(&self) -> &PolicyParams<S> {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut PolicyParams<S> {
        &mut self.params
    }

    pub fn initial_state(&self, short: &str) -> PromptState {
        PromptState::new(short, &self.featurizer)
    }

    pub fn range_label(&self) -> &[S] {
        &self.range_label
    }

    pub fn weight_label(&self) -> &[S] {
        &self.weight_label
    }

    /// Reference next-word distribution at `state`.
    pub fn reference_words(&self, state: &PromptState) -> Vec<S> {
        self.reference.word_distribution(&state.emitted).into_iter().map(S::of).collect()
    }

    pub fn word_logits(&self, state: &PromptState, x: &SparseFeatures<S>) -> Vec<S> {
        let mut z: Vec<S> = self.reference_words(state).into_iter().map(|p| p.max(S::of(KL_EPSILON)).ln()).collect();
        add_matvec(&self.params.word, self.featurizer.dim(), x, &mut z);
        z
    }

    pub fn range_logits(&self, x: &SparseFeatures<S>) -> Vec<S> {
        let mut z: Vec<S> = self.range_label.iter().map(|p| p.ln()).collect();
        add_matvec(&self.params.range, self.featurizer.dim(), x, &mut z);
        z
    }

    pub fn weight_logits(&self, x: &SparseFeatures<S>) -> Vec<S> {
        let mut z: Vec<S> = self.weight_label.iter().map(|p| p.ln()).collect();
        add_matvec(&self.params.weight, self.featurizer.dim(), x, &mut z);
        z
    }

    /// Log-probabilities of the word head at `state`.
    pub fn word_log_probs(&self, state: &PromptState) -> Vec<S> {
        let x = self.featurizer.state_features(state);
        log_softmax(&self.word_logits(state, &x))
    }

    /// Log-probabilities of the range and weight heads for `token` at `state`.
    pub fn range_weight_log_probs(&self, state: &PromptState, token: usize) -> (Vec<S>, Vec<S>) {
        let x = self.featurizer.token_features(state, token);
        (log_softmax(&self.range_logits(&x)), log_softmax(&self.weight_logits(&x)))
    }
}

/// Scalar state-value regressor on the policy's featurizer.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueModel<S> {
    featurizer: Featurizer,
    pub weights: Vec<S>,
}

impl<S: Scalar> ValueModel<S> {
    pub fn new(featurizer: Featurizer) -> Self {
        Self { weights: vec![S::zero(); featurizer.dim()], featurizer }
    }

    pub fn featurizer(&self) -> &Featurizer {
        &self.featurizer
    }

    pub fn value(&self, state: &PromptState) -> S {
        let x: SparseFeatures<S> = self.featurizer.state_features(state);
        x.iter().map(|&(i, v)| self.weights[i] * v).sum()
    }
}
