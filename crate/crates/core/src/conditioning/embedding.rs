use crate::prompt::DfPrompt;
use crate::scalar::{stable_mean, Scalar};

use super::schedule::step_time;

/// Below this magnitude the post-weighting mean is treated as zero and the
/// mean-restoring rescale is skipped.
pub const MEAN_EPSILON: f64 = 1e-12;

/// Row-major token embeddings with one weight per row.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix<S> {
    data: Vec<S>,
    dim: usize,
    weights: Vec<S>,
    degenerate_mean: bool,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EmbeddingError {
    #[error("row {row} has width {width}, expected {dim}")]
    RaggedRow { row: usize, width: usize, dim: usize },
    #[error("{rows} rows but {weights} weights")]
    WeightCount { rows: usize, weights: usize },
    #[error("weight {index} is not positive")]
    NonPositiveWeight { index: usize },
}

impl<S: Scalar> EmbeddingMatrix<S> {
    pub fn new(rows: Vec<Vec<S>>, weights: Vec<S>) -> Result<Self, EmbeddingError> {
        if rows.len() != weights.len() {
            return Err(EmbeddingError::WeightCount { rows: rows.len(), weights: weights.len() });
        }
        if let Some(index) = weights.iter().position(|w| w.partial_cmp(&S::zero()) != Some(std::cmp::Ordering::Greater)) {
            return Err(EmbeddingError::NonPositiveWeight { index });
        }
        let dim = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * dim);
        for (row, r) in rows.into_iter().enumerate() {
            if r.len() != dim {
                return Err(EmbeddingError::RaggedRow { row, width: r.len(), dim });
            }
            data.extend(r);
        }
        Ok(Self { data, dim, weights, degenerate_mean: false })
    }

    /// All rows weighted 1.
    pub fn unweighted(rows: Vec<Vec<S>>) -> Result<Self, EmbeddingError> {
        let weights = vec![S::one(); rows.len()];
        Self::new(rows, weights)
    }

    pub fn rows(&self) -> usize {
        self.weights.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[S] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn as_slice(&self) -> &[S] {
        &self.data
    }

    pub fn weights(&self) -> &[S] {
        &self.weights
    }

    pub fn grand_mean(&self) -> S {
        stable_mean(&self.data)
    }

    /// Set when weighting drove the grand mean to (near) zero and the
    /// rescale was skipped.
    pub fn degenerate_mean(&self) -> bool {
        self.degenerate_mean
    }
}

/// Scales each row by its weight, then rescales the whole matrix so its grand
/// mean matches the input's.
///
/// All-ones weights return the input unchanged.
pub fn weight_embeddings<S: Scalar>(m: &EmbeddingMatrix<S>) -> EmbeddingMatrix<S> {
    if m.weights.iter().all(|w| *w == S::one()) {
        return m.clone();
    }
    let previous_mean = m.grand_mean();
    let mut data = m.data.clone();
    if m.dim > 0 {
        for (row, w) in data.chunks_mut(m.dim).zip(&m.weights) {
            row.iter_mut().for_each(|x| *x *= *w);
        }
    }
    let current_mean = stable_mean(&data);
    let degenerate_mean = current_mean.abs() < S::of(MEAN_EPSILON);
    if !degenerate_mean {
        let scale = previous_mean / current_mean;
        data.iter_mut().for_each(|x| *x *= scale);
    }
    EmbeddingMatrix { data, dim: m.dim, weights: m.weights.clone(), degenerate_mean }
}

/// The weighted, mean-restored embedding matrix for step `i` of an
/// `n_steps` schedule. Inactive modifiers are left out entirely.
pub fn step_conditioning<S, F>(p: &DfPrompt, n_steps: usize, i: usize, mut embed: F) -> EmbeddingMatrix<S>
where
    S: Scalar,
    F: FnMut(&str) -> Vec<S>,
{
    assert!(i < n_steps, "step {i} outside schedule of {n_steps}");
    let time = step_time(i, n_steps);
    let mut rows: Vec<Vec<S>> = p.base_words().map(&mut embed).collect();
    let mut weights = vec![S::one(); rows.len()];
    for t in p.triples().iter().filter(|t| t.range().contains(time)) {
        rows.push(embed(t.token()));
        weights.push(S::of(t.weight()));
    }
    let m = EmbeddingMatrix::new(rows, weights).expect("embedding rows share one width and weights are positive");
    weight_embeddings(&m)
}

/// Conditioning matrices for every step of the schedule.
pub fn schedule_conditioning<S, F>(p: &DfPrompt, n_steps: usize, mut embed: F) -> Vec<EmbeddingMatrix<S>>
where
    S: Scalar,
    F: FnMut(&str) -> Vec<S>,
{
    (0..n_steps).map(|i| step_conditioning(p, n_steps, i, &mut embed)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prompt::parse_dfprompt;

    #[test]
    fn identity_weights_are_exact() {
        let m = EmbeddingMatrix::unweighted(vec![vec![0.1_f64, 0.7], vec![-3.0, 1e-3]]).unwrap();
        assert_eq!(weight_embeddings(&m), m);
    }

    #[test]
    fn hand_computed_rescale() {
        let m = EmbeddingMatrix::new(vec![vec![1.0_f64, 2.0], vec![3.0, 4.0]], vec![2.0, 1.0]).unwrap();
        let out = weight_embeddings(&m);
        let k = 2.5 / 3.25;
        let expected = [2.0 * k, 4.0 * k, 3.0 * k, 4.0 * k];
        for (a, b) in out.as_slice().iter().zip(expected) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!((out.grand_mean() - 2.5).abs() < 1e-12);
        assert!(!out.degenerate_mean());
    }

    #[test]
    fn zero_mean_is_flagged_not_divided() {
        let m = EmbeddingMatrix::new(vec![vec![1.0_f64, -1.0], vec![-1.0, 1.0]], vec![1.5, 1.5]).unwrap();
        let out = weight_embeddings(&m);
        assert!(out.degenerate_mean());
        assert_eq!(out.as_slice(), [1.5, -1.5, -1.5, 1.5]);
    }

    #[test]
    fn works_in_single_precision() {
        let m = EmbeddingMatrix::new(vec![vec![1.0_f32, 2.0], vec![3.0, 4.0]], vec![2.0, 1.0]).unwrap();
        let out = weight_embeddings(&m);
        assert!((out.grand_mean() - 2.5).abs() < 1e-5);
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(matches!(
            EmbeddingMatrix::new(vec![vec![1.0_f64], vec![1.0, 2.0]], vec![1.0, 1.0]),
            Err(EmbeddingError::RaggedRow { row: 1, .. })
        ));
        assert!(EmbeddingMatrix::new(vec![vec![1.0_f64]], vec![0.0]).is_err());
        assert!(EmbeddingMatrix::new(vec![vec![1.0_f64]], vec![]).is_err());
    }

    fn toy_embed(token: &str) -> Vec<f64> {
        let h = token.bytes().fold(7u64, |acc, b| acc.wrapping_mul(31).wrapping_add(b as u64));
        (0..4).map(|k| ((h >> (k * 8)) & 0xff) as f64 / 255.0 + 0.1).collect()
    }

    #[test]
    fn late_modifier_absent_at_first_step() {
        let p = parse_dfprompt("a cat, [x : 0.5->0 : 1]").unwrap();
        assert_eq!(step_conditioning(&p, 10, 0, toy_embed).rows(), 2);
        assert_eq!(step_conditioning(&p, 10, 9, toy_embed).rows(), 3);
    }

    #[test]
    fn step_conditioning_is_deterministic() {
        let p = parse_dfprompt("a cat, [x : 1->0 : 1.5], [y : 1->0.5 : 0.5]").unwrap();
        let a = schedule_conditioning(&p, 6, toy_embed);
        let b = schedule_conditioning(&p, 6, toy_embed);
        assert_eq!(a, b);
        assert_eq!(a.len(), 6);
    }
}
