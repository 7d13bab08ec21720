use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;
use crate::util::fnv1a;

/// Shared state featurizer of the policy and value models.
///
/// Layout of the feature vector (width [`Featurizer::dim`]):
///
/// | block            | width        | content                                   |
/// |------------------|--------------|-------------------------------------------|
/// | emitted bag      | `vocab_size` | counts of modifiers already emitted       |
/// | position         | `positions`  | one-hot of the number emitted (clamped)   |
/// | prompt buckets   | `buckets`    | hashed bag of the short prompt's words    |
/// | bias             | 1            | constant 1                                |
/// | current token    | `vocab_size` | one-hot of the token being decorated      |
///
/// Only the trailing `context_len` words of `s ⊕ emitted` are visible.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Featurizer {
    pub vocab_size: usize,
    pub positions: usize,
    pub buckets: usize,
    pub context_len: usize,
}

pub type SparseFeatures<S> = Vec<(usize, S)>;

/// A policy state: the short prompt plus the modifier tokens emitted so far.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptState {
    short: String,
    base_buckets: Vec<usize>,
    pub emitted: Vec<usize>,
}

impl PromptState {
    pub fn new(short: &str, featurizer: &Featurizer) -> Self {
        let base_buckets = short
            .split_whitespace()
            .map(|w| (fnv1a(&[w.to_lowercase().as_bytes()]) % featurizer.buckets.max(1) as u64) as usize)
            .collect();
        Self { short: short.to_string(), base_buckets, emitted: Vec::new() }
    }

    pub fn short(&self) -> &str {
        &self.short
    }

    /// The state after the first `t` emitted tokens.
    pub fn prefix(&self, t: usize) -> Self {
        Self { short: self.short.clone(), base_buckets: self.base_buckets.clone(), emitted: self.emitted[..t].to_vec() }
    }
}

impl Featurizer {
    pub fn new(vocab_size: usize, context_len: usize) -> Self {
        Self { vocab_size, positions: 16, buckets: 16, context_len }
    }

    pub fn dim(&self) -> usize {
        2 * self.vocab_size + self.positions + self.buckets + 1
    }

    fn position_offset(&self) -> usize {
        self.vocab_size
    }

    fn bucket_offset(&self) -> usize {
        self.vocab_size + self.positions
    }

    fn bias_index(&self) -> usize {
        self.vocab_size + self.positions + self.buckets
    }

    fn current_offset(&self) -> usize {
        self.bias_index() + 1
    }

    /// Features of `state` alone (the current-token block is empty).
    pub fn state_features<S: Scalar>(&self, state: &PromptState) -> SparseFeatures<S> {
        let emitted = &state.emitted;
        let visible_emitted = emitted.len().min(self.context_len);
        let visible_base = (self.context_len - visible_emitted).min(state.base_buckets.len());

        let mut out: SparseFeatures<S> = Vec::new();
        for &tok in &emitted[emitted.len() - visible_emitted..] {
            match out.iter_mut().find(|(i, _)| *i == tok) {
                Some((_, c)) => *c += S::one(),
                None => out.push((tok, S::one())),
            }
        }
        let pos = emitted.len().min(self.positions.saturating_sub(1));
        if self.positions > 0 {
            out.push((self.position_offset() + pos, S::one()));
        }
        let mut buckets: Vec<(usize, S)> = Vec::new();
        for &b in &state.base_buckets[state.base_buckets.len() - visible_base..] {
            let idx = self.bucket_offset() + b;
            match buckets.iter_mut().find(|(i, _)| *i == idx) {
                Some((_, c)) => *c += S::one(),
                None => buckets.push((idx, S::one())),
            }
        }
        out.extend(buckets);
        out.push((self.bias_index(), S::one()));
        out
    }

    /// Features of `state` with `token` about to be emitted; used by the
    /// range and weight heads.
    pub fn token_features<S: Scalar>(&self, state: &PromptState, token: usize) -> SparseFeatures<S> {
        let mut out = self.state_features(state);
        out.push((self.current_offset() + token, S::one()));
        out
    }
}

/// `out[j] += Σ_i W[j, i] · x_i` for a row-major `rows × dim` matrix.
pub fn add_matvec<S: Scalar>(weights: &[S], dim: usize, x: &[(usize, S)], out: &mut [S]) {
    for (j, o) in out.iter_mut().enumerate() {
        let row = &weights[j * dim..(j + 1) * dim];
        *o += x.iter().map(|&(i, v)| row[i] * v).sum::<S>();
    }
}

/// `G[j, i] += g_j · x_i`.
pub fn add_outer<S: Scalar>(grad: &mut [S], dim: usize, g: &[S], x: &[(usize, S)]) {
    for (j, &gj) in g.iter().enumerate() {
        if gj == S::zero() {
            continue;
        }
        let row = &mut grad[j * dim..(j + 1) * dim];
        for &(i, v) in x {
            row[i] += gj * v;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_and_context_window() {
        let f = Featurizer { vocab_size: 4, positions: 3, buckets: 2, context_len: 3 };
        assert_eq!(f.dim(), 14);
        let mut s = PromptState::new("a red fox", &f);
        let x: SparseFeatures<f64> = f.state_features(&s);
        // position 0, 3 base words, bias
        assert!(x.contains(&(4, 1.0)));
        assert_eq!(x.iter().filter(|(i, _)| (7..9).contains(i)).map(|(_, v)| v).sum::<f64>(), 3.0);
        assert!(x.contains(&(9, 1.0)));

        s.emitted = vec![1, 1, 2, 0];
        let x: SparseFeatures<f64> = f.state_features(&s);
        // only the last three emitted are visible, no base words
        assert!(x.contains(&(1, 1.0)));
        assert!(x.contains(&(2, 1.0)));
        assert!(x.contains(&(0, 1.0)));
        assert!(x.contains(&(6, 1.0)), "position clamps to the last slot");
        assert!(!x.iter().any(|(i, _)| (7..9).contains(i)));

        let y: SparseFeatures<f64> = f.token_features(&s, 3);
        assert_eq!(y.last(), Some(&(10 + 3, 1.0)));
    }

    #[test]
    fn matvec_and_outer() {
        let w = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let x = [(0, 1.0), (2, 2.0)];
        let mut out = [0.0; 2];
        add_matvec(&w, 3, &x, &mut out);
        assert_eq!(out, [7.0, 16.0]);
        let mut g = [0.0; 6];
        add_outer(&mut g, 3, &[1.0, -1.0], &x);
        assert_eq!(g, [1.0, 0.0, 2.0, -1.0, 0.0, -2.0]);
    }
}
