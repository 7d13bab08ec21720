use serde::{Deserialize, Serialize};

use super::dist::{kl_from_log, log_softmax, KL_EPSILON};
use super::features::{add_outer, Featurizer};
use super::model::{PolicyModel, PolicyParams, ValueModel};
use super::rollout::{KlHeads, Trajectory};
use super::PolicyError;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PpoConfig {
    pub eta: f64,
    pub clip_epsilon: f64,
    pub kl_heads: KlHeads,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
}

impl Default for PpoConfig {
    fn default() -> Self {
        Self { eta: 0.02, clip_epsilon: 0.2, kl_heads: KlHeads::All, lr: 5e-5, beta1: 0.9, beta2: 0.95, adam_eps: 1e-8 }
    }
}

/// Adam over a flat parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam<S> {
    pub lr: S,
    pub beta1: S,
    pub beta2: S,
    pub eps: S,
    m: Vec<S>,
    v: Vec<S>,
    t: i32,
}

impl<S: Scalar> Adam<S> {
    pub fn new(len: usize, lr: f64, beta1: f64, beta2: f64, eps: f64) -> Self {
        Self {
            lr: S::of(lr),
            beta1: S::of(beta1),
            beta2: S::of(beta2),
            eps: S::of(eps),
            m: vec![S::zero(); len],
            v: vec![S::zero(); len],
            t: 0,
        }
    }

    pub fn steps(&self) -> i32 {
        self.t
    }

    pub fn step(&mut self, params: &mut [S], grad: &[S]) {
        assert_eq!(params.len(), self.m.len());
        assert_eq!(grad.len(), self.m.len());
        self.t += 1;
        let one = S::one();
        let c1 = one - self.beta1.powi(self.t);
        let c2 = one - self.beta2.powi(self.t);
        for i in 0..params.len() {
            let g = grad[i];
            self.m[i] = self.beta1 * self.m[i] + (one - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (one - self.beta2) * g * g;
            let m_hat = self.m[i] / c1;
            let v_hat = self.v[i] / c2;
            params[i] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
        }
    }
}

/// `∂ ln softmax(z)_a / ∂z = e_a − softmax(z)`, scaled by `scale`.
fn log_prob_grad<S: Scalar>(log_p: &[S], action: usize, scale: S) -> Vec<S> {
    log_p
        .iter()
        .enumerate()
        .map(|(k, &lp)| {
            let e = if k == action { S::one() } else { S::zero() };
            scale * (e - lp.exp())
        })
        .collect()
}

/// `∂ KL(softmax(z) ‖ q) / ∂z`, scaled by `scale`.
fn kl_grad<S: Scalar>(log_p: &[S], q: &[S], scale: S) -> Vec<S> {
    let kl = kl_from_log(log_p, q);
    let eps = S::of(KL_EPSILON);
    log_p.iter().zip(q).map(|(&lp, &qk)| scale * lp.exp() * (lp - qk.max(eps).ln() - kl)).collect()
}

fn clipped_surrogate<S: Scalar>(ratio: S, adv: S, eps: S) -> (S, bool) {
    let one = S::one();
    let unclipped = ratio * adv;
    let clipped = ratio.max(one - eps).min(one + eps) * adv;
    if unclipped <= clipped {
        (unclipped, true)
    } else {
        (clipped, false)
    }
}

fn check_batch<S: Scalar>(batch: &[Trajectory<S>]) -> Result<usize, PolicyError> {
    if batch.is_empty() {
        return Err(PolicyError::EmptyBatch);
    }
    if let Some(i) = batch.iter().position(|t| t.reward.is_none()) {
        return Err(PolicyError::Unscored(i));
    }
    Ok(batch.iter().map(|t| t.steps.len()).sum())
}

/// Clipped-surrogate policy loss with KL penalty, and its gradient with
/// respect to the policy parameters.
///
/// Advantages are `R − V_old(s_t)` using the values recorded at rollout time;
/// ratios compare the current parameters against the recorded log-probs.
pub fn policy_objective<S: Scalar>(
    policy: &PolicyModel<S>,
    batch: &[Trajectory<S>],
    cfg: &PpoConfig,
) -> Result<(S, PolicyParams<S>), PolicyError> {
    let n_steps = check_batch(batch)?;
    let featurizer: Featurizer = *policy.featurizer();
    let dim = featurizer.dim();
    let eps = S::of(cfg.clip_epsilon);
    let eta = S::of(cfg.eta);
    let n_terms: usize = batch
        .iter()
        .flat_map(|t| &t.steps)
        .map(|s| 1 + usize::from(s.action.log_probs.range.is_some()) + usize::from(s.action.log_probs.weight.is_some()))
        .sum();
    if n_steps == 0 {
        return Ok((S::zero(), PolicyParams::zeros(featurizer.vocab_size, dim)));
    }
    let pg_scale = -S::one() / S::of(n_terms as f64);
    let kl_scale = eta / S::of(n_steps as f64);

    let mut grad = PolicyParams::zeros(featurizer.vocab_size, dim);
    let mut surrogate = S::zero();
    let mut kl_total = S::zero();
    for traj in batch {
        let reward = traj.reward.expect("checked");
        for (t, step) in traj.steps.iter().enumerate() {
            let state = traj.state_before(t);
            let adv = reward - step.value;
            let a = step.action;

            let x = featurizer.state_features(&state);
            let word_lp = log_softmax(&policy.word_logits(&state, &x));
            let mut g_word = vec![S::zero(); word_lp.len()];
            let ratio = (word_lp[a.token] - a.log_probs.word).exp();
            let (sur, active) = clipped_surrogate(ratio, adv, eps);
            surrogate += sur;
            if active {
                g_word = log_prob_grad(&word_lp, a.token, pg_scale * ratio * adv);
            }
            let reference = policy.reference_words(&state);
            kl_total += kl_from_log(&word_lp, &reference);
            for (g, k) in g_word.iter_mut().zip(kl_grad(&word_lp, &reference, kl_scale)) {
                *g += k;
            }
            add_outer(&mut grad.word, dim, &g_word, &x);

            let decorated = !a.is_end && policy.mode() == super::model::HeadMode::Full;
            if !decorated {
                continue;
            }
            let xt = featurizer.token_features(&state, a.token);
            let heads = [
                (policy.range_logits(&xt), a.range, a.log_probs.range, policy.range_label(), &mut grad.range),
                (policy.weight_logits(&xt), a.weight, a.log_probs.weight, policy.weight_label(), &mut grad.weight),
            ];
            for (logits, choice, old, label, g_head) in heads {
                let lp = log_softmax(&logits);
                let mut g = vec![S::zero(); lp.len()];
                if let Some(old) = old {
                    let ratio = (lp[choice] - old).exp();
                    let (sur, active) = clipped_surrogate(ratio, adv, eps);
                    surrogate += sur;
                    if active {
                        g = log_prob_grad(&lp, choice, pg_scale * ratio * adv);
                    }
                }
                if cfg.kl_heads == KlHeads::All {
                    kl_total += kl_from_log(&lp, label);
                    for (gi, k) in g.iter_mut().zip(kl_grad(&lp, label, kl_scale)) {
                        *gi += k;
                    }
                }
                add_outer(g_head, dim, &g, &xt);
            }
        }
    }
    let loss = -surrogate / S::of(n_terms as f64) + eta * kl_total / S::of(n_steps as f64);
    Ok((loss, grad))
}

/// Mean squared error of the value head against the episode rewards over all
/// visited states, and its gradient.
pub fn value_objective<S: Scalar>(value: &ValueModel<S>, batch: &[Trajectory<S>]) -> Result<(S, Vec<S>), PolicyError> {
    let n_steps = check_batch(batch)?;
    let mut grad = vec![S::zero(); value.weights.len()];
    if n_steps == 0 {
        return Ok((S::zero(), grad));
    }
    let n = S::of(n_steps as f64);
    let mut loss = S::zero();
    for traj in batch {
        let reward = traj.reward.expect("checked");
        for t in 0..traj.steps.len() {
            let state = traj.state_before(t);
            let x = value.featurizer().state_features::<S>(&state);
            let err = x.iter().map(|&(i, v)| value.weights[i] * v).sum::<S>() - reward;
            loss += err * err;
            for &(i, v) in &x {
                grad[i] += S::of(2.0) * err * v / n;
            }
        }
    }
    Ok((loss / n, grad))
}

/// Owns the optimizer state of one training run.
#[derive(Debug, Clone)]
pub struct PpoLearner<S> {
    pub config: PpoConfig,
    policy_opt: Adam<S>,
    value_opt: Adam<S>,
}

impl<S: Scalar> PpoLearner<S> {
    pub fn new(config: PpoConfig, policy: &PolicyModel<S>, value: &ValueModel<S>) -> Self {
        let adam = |len| Adam::new(len, config.lr, config.beta1, config.beta2, config.adam_eps);
        Self { policy_opt: adam(policy.params().len()), value_opt: adam(value.weights.len()), config }
    }

    /// One optimization pass: a policy step followed by a value step.
    /// Parameters are left untouched when either loss is not finite.
    pub fn update(
        &mut self,
        policy: &mut PolicyModel<S>,
        value: &mut ValueModel<S>,
        batch: &[Trajectory<S>],
        episode: usize,
    ) -> Result<(S, S), PolicyError> {
        let (p_loss, p_grad) = policy_objective(policy, batch, &self.config)?;
        let (v_loss, v_grad) = value_objective(value, batch)?;
        let finite = |what, x: S| {
            if x.is_finite() {
                Ok(())
            } else {
                Err(PolicyError::NonFiniteLoss { what, episode, value: x.as_f64() })
            }
        };
        finite("policy loss", p_loss)?;
        finite("value loss", v_loss)?;
        let mut flat = policy.params().to_flat();
        self.policy_opt.step(&mut flat, &p_grad.to_flat());
        policy.params_mut().copy_from_flat(&flat);
        self.value_opt.step(&mut value.weights, &v_grad);
        Ok((p_loss, v_loss))
    }
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::policy::model::HeadMode;
    use crate::policy::rollout::{rollout, SamplingConfig};
    use crate::policy::testing::uniform_reference;

    fn batch(policy: &PolicyModel<f64>, value: &ValueModel<f64>, n: usize, seed: u64) -> Vec<Trajectory<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|i| {
                let mut t = rollout(policy, value, "a cat", 3, &SamplingConfig::default(), KlHeads::All, &mut rng);
                t.reward = Some(i as f64 * 0.3 - 0.5);
                t
            })
            .collect()
    }

    #[test]
    fn adam_first_step_moves_by_lr() {
        let mut adam = Adam::<f64>::new(2, 0.1, 0.9, 0.95, 1e-8);
        let mut p = [1.0, 1.0];
        adam.step(&mut p, &[3.0, -0.5]);
        assert!((p[0] - 0.9).abs() < 1e-6);
        assert!((p[1] - 1.1).abs() < 1e-6);
    }

    #[test]
    fn zero_advantage_leaves_kl_only() {
        let policy = PolicyModel::from_reference(uniform_reference(&["x", "y"]), 64, HeadMode::Full);
        let value = ValueModel::new(*policy.featurizer());
        let mut b = batch(&policy, &value, 4, 0);
        for t in &mut b {
            t.reward = Some(0.0);
        }
        let cfg = PpoConfig::default();
        let (loss, grad) = policy_objective(&policy, &b, &cfg).unwrap();
        // untrained: KL is zero as well
        assert!(loss.abs() < 1e-12);
        assert!(grad.to_flat().iter().all(|g| g.abs() < 1e-12));
    }

    #[test]
    fn dominant_reward_raises_its_probability() {
        let mut policy = PolicyModel::<f64>::from_reference(uniform_reference(&["good", "bad"]), 64, HeadMode::Full);
        let mut value = ValueModel::new(*policy.featurizer());
        let s = policy.initial_state("p");
        let good = policy.spaces().index_of("good").unwrap();
        let before = policy.word_log_probs(&s)[good].exp();
        let mut b = batch(&policy, &value, 32, 3);
        for t in &mut b {
            let first = t.steps[0].action.token;
            t.reward = Some(if first == good { 1.0 } else { 0.0 });
        }
        let cfg = PpoConfig { eta: 0.0, lr: 0.01, ..PpoConfig::default() };
        let mut learner = PpoLearner::new(cfg, &policy, &value);
        learner.update(&mut policy, &mut value, &b, 0).unwrap();
        let after = policy.word_log_probs(&s)[good].exp();
        assert!(after > before, "{before} -> {after}");
    }

    #[test]
    fn value_loss_non_increasing_on_fixed_batch() {
        let mut policy = PolicyModel::from_reference(uniform_reference(&["x", "y", "z"]), 64, HeadMode::Full);
        let mut value = ValueModel::new(*policy.featurizer());
        let b = batch(&policy, &value, 8, 4);
        let cfg = PpoConfig { lr: 1e-3, ..PpoConfig::default() };
        let mut learner = PpoLearner::new(cfg, &policy, &value);
        let mut last = f64::INFINITY;
        for ep in 0..100 {
            let (_, v) = learner.update(&mut policy, &mut value, &b, ep).unwrap();
            assert!(v <= last + 1e-12, "episode {ep}: {v} > {last}");
            last = v;
        }
    }

    #[test]
    fn empty_and_unscored_batches_are_rejected() {
        let policy = PolicyModel::<f64>::from_reference(uniform_reference(&["x"]), 64, HeadMode::Full);
        let value = ValueModel::new(*policy.featurizer());
        assert!(matches!(policy_objective(&policy, &[], &PpoConfig::default()), Err(PolicyError::EmptyBatch)));
        let mut b = batch(&policy, &value, 2, 5);
        b[1].reward = None;
        assert!(matches!(value_objective(&value, &b), Err(PolicyError::Unscored(1))));
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut policy = PolicyModel::from_reference(uniform_reference(&["x", "y", "z"]), 64, HeadMode::Full);
        let value = ValueModel::new(*policy.featurizer());
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let flat: Vec<f64> = (0..policy.params().len()).map(|_| rand::Rng::random_range(&mut rng, -0.3..0.3)).collect();
        let b = batch(&policy, &value, 4, 6);
        policy.params_mut().copy_from_flat(&flat);
        let cfg = PpoConfig { eta: 0.5, clip_epsilon: 10.0, ..PpoConfig::default() };
        let (_, grad) = policy_objective(&policy, &b, &cfg).unwrap();
        let grad = grad.to_flat();
        let h = 1e-6;
        for i in (0..flat.len()).step_by(7) {
            let mut p = flat.clone();
            p[i] += h;
            policy.params_mut().copy_from_flat(&p);
            let up = policy_objective(&policy, &b, &cfg).unwrap().0;
            p[i] -= 2.0 * h;
            policy.params_mut().copy_from_flat(&p);
            let down = policy_objective(&policy, &b, &cfg).unwrap().0;
            let fd = (up - down) / (2.0 * h);
            assert!((fd - grad[i]).abs() <= 1e-6 + 1e-4 * fd.abs().max(grad[i].abs()), "param {i}: {fd} vs {}", grad[i]);
        }
    }
}
