use std::fmt;

use crate::prompt::{DfPrompt, EffectRange};

/// Active tokens at one denoising step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepPlan {
    pub step_index: usize,
    /// `(N - i) / N`; `1` at the first step.
    pub time: f64,
    pub active: Vec<(String, f64)>,
}

impl StepPlan {
    pub fn contains_token(&self, token: &str) -> bool {
        self.active.iter().any(|(t, _)| t == token)
    }
}

impl fmt::Display for StepPlan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "step={} t={} tokens=", self.step_index, self.time)?;
        for (k, (token, weight)) in self.active.iter().enumerate() {
            if k > 0 {
                f.write_str(",")?;
            }
            write!(f, "{token}:{weight}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PromptSchedule {
    steps: Vec<StepPlan>,
}

impl PromptSchedule {
    pub fn steps(&self) -> &[StepPlan] {
        &self.steps
    }

    pub fn step_count(&self) -> usize {
        self.steps.len()
    }

    /// One `step=<i> t=<t> tokens=<token:weight,...>` line per step.
    pub fn export(&self) -> String {
        let mut out = String::new();
        for step in &self.steps {
            out.push_str(&step.to_string());
            out.push('\n');
        }
        out
    }
}

/// Normalized time of step `i` out of `n_steps`.
pub fn step_time(i: usize, n_steps: usize) -> f64 {
    (n_steps - i) as f64 / n_steps as f64
}

/// Step indices at which a modifier with `range` is injected.
pub fn active_steps(range: EffectRange, n_steps: usize) -> Vec<usize> {
    (0..n_steps).filter(|&i| range.contains(step_time(i, n_steps))).collect()
}

/// Expands a prompt into per-step token lists. Base words are present at
/// every step with weight 1; a modifier is present at step `i` iff
/// `end < t_i <= begin`.
///
/// # Panics
/// If `n_steps` is zero.
pub fn build_schedule(p: &DfPrompt, n_steps: usize) -> PromptSchedule {
    assert!(n_steps >= 1, "a schedule needs at least one step");
    let base: Vec<(String, f64)> = p.base_words().map(|w| (w.to_string(), 1.0)).collect();
    let steps = (0..n_steps)
        .map(|i| {
            let time = step_time(i, n_steps);
            let mut active = base.clone();
            active.extend(
                p.triples()
                    .iter()
                    .filter(|t| t.range().contains(time))
                    .map(|t| (t.token().to_string(), t.weight())),
            );
            StepPlan { step_index: i, time, active }
        })
        .collect();
    PromptSchedule { steps }
}
