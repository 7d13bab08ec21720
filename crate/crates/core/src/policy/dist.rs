//! Categorical-distribution helpers shared by the policy heads.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::prompt::ActionSpaces;
use crate::scalar::Scalar;

/// Floor applied to reference probabilities inside KL terms and prior logits.
pub const KL_EPSILON: f64 = 1e-10;

pub fn log_softmax<S: Scalar>(logits: &[S]) -> Vec<S> {
    let max = logits.iter().copied().fold(S::neg_infinity(), S::max);
    let lse = max + logits.iter().map(|&z| (z - max).exp()).sum::<S>().ln();
    logits.iter().map(|&z| z - lse).collect()
}

pub fn softmax<S: Scalar>(logits: &[S]) -> Vec<S> {
    log_softmax(logits).into_iter().map(S::exp).collect()
}

/// `KL(p ‖ q)` with `q` floored at [`KL_EPSILON`]; zero-probability entries
/// of `p` contribute nothing.
pub fn kl_divergence<S: Scalar>(p: &[S], q: &[S]) -> S {
    debug_assert_eq!(p.len(), q.len());
    let eps = S::of(KL_EPSILON);
    p.iter()
        .zip(q)
        .filter(|(pi, _)| **pi > S::zero())
        .map(|(&pi, &qi)| pi * (pi.ln() - qi.max(eps).ln()))
        .sum()
}

/// Same as [`kl_divergence`] but takes `ln p` directly, which stays finite
/// where `p` underflows.
pub fn kl_from_log<S: Scalar>(log_p: &[S], q: &[S]) -> S {
    let eps = S::of(KL_EPSILON);
    log_p
        .iter()
        .zip(q)
        .map(|(&lp, &qi)| {
            let pi = lp.exp();
            if pi > S::zero() {
                pi * (lp - qi.max(eps).ln())
            } else {
                S::zero()
            }
        })
        .sum()
}

/// Discretized Gaussian over `grid`: `p(g) ∝ exp(-(g - mean)² / 2σ²)`.
pub fn gaussian_labels(grid: &[f64], mean: f64, sigma: f64) -> Vec<f64> {
    assert!(sigma > 0.0, "sigma must be positive");
    let logits: Vec<f64> = grid.iter().map(|g| -(g - mean).powi(2) / (2.0 * sigma * sigma)).collect();
    softmax(&logits)
}

/// Gaussian label smoothing for the range and weight heads.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SmoothingConfig {
    pub sigma: f64,
}

impl Default for SmoothingConfig {
    fn default() -> Self {
        Self { sigma: 0.5 }
    }
}

impl SmoothingConfig {
    /// Ranges are embedded on the line by their midpoints (0.25, 0.5, 0.75);
    /// the label is centred on `1->0`.
    pub fn range_labels(&self) -> Vec<f64> {
        let grid: Vec<f64> = ActionSpaces::RANGES.iter().map(|r| r.midpoint()).collect();
        let mean = ActionSpaces::RANGES[ActionSpaces::DEFAULT_RANGE_INDEX].midpoint();
        gaussian_labels(&grid, mean, self.sigma)
    }

    /// Centred on weight 1.
    pub fn weight_labels(&self) -> Vec<f64> {
        gaussian_labels(&ActionSpaces::WEIGHTS, ActionSpaces::WEIGHTS[ActionSpaces::DEFAULT_WEIGHT_INDEX], self.sigma)
    }
}

/// `(range labels, weight labels)` for `cfg`.
pub fn smooth_labels(cfg: &SmoothingConfig) -> (Vec<f64>, Vec<f64>) {
    (cfg.range_labels(), cfg.weight_labels())
}

/// Index of the first maximum.
pub fn argmax<S: Scalar>(values: &[S]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Draws an index from normalized probabilities by inverse CDF.
pub fn sample_index<S: Scalar, R: Rng + ?Sized>(probs: &[S], rng: &mut R) -> usize {
    let u = S::of(rng.random::<f64>());
    let mut acc = S::zero();
    let mut last_positive = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p > S::zero() {
            last_positive = i;
        }
        acc += p;
        if u < acc {
            return i;
        }
    }
    last_positive
}

/// Sampling distribution after temperature scaling and, when `top_k` is
/// given, truncation to the `k` most likely entries (earlier index wins ties).
/// A temperature at or below `1e-6` yields a point mass on the argmax.
pub fn tempered<S: Scalar>(logits: &[S], temperature: f64, top_k: Option<usize>) -> Vec<S> {
    if temperature <= 1e-6 {
        let mut p = vec![S::zero(); logits.len()];
        p[argmax(logits)] = S::one();
        return p;
    }
    let t = S::of(temperature);
    let mut scaled: Vec<S> = logits.iter().map(|&z| z / t).collect();
    if let Some(k) = top_k.filter(|&k| k < logits.len()) {
        let mut order: Vec<usize> = (0..logits.len()).collect();
        order.sort_by(|&a, &b| scaled[b].partial_cmp(&scaled[a]).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b)));
        for &i in &order[k.max(1)..] {
            scaled[i] = S::neg_infinity();
        }
    }
    softmax(&scaled)
}
