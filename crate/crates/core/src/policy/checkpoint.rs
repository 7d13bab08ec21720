use std::fs;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::features::Featurizer;
use super::model::{HeadMode, PolicyModel, PolicyParams, ValueModel};
use super::reference::ReferenceModel;
use super::PolicyError;

pub const CHECKPOINT_FORMAT: &str = "dfprompt-policy/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamArrays {
    pub word: Vec<f64>,
    pub range: Vec<f64>,
    pub weight: Vec<f64>,
}

/// Serialized policy and value models. The reference carries the action
/// spaces; `config` echoes the run configuration that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub format: String,
    pub vocabulary: Vec<String>,
    pub ranges: Vec<String>,
    pub weights: Vec<f64>,
    pub head_mode: HeadMode,
    pub featurizer: Featurizer,
    pub params: ParamArrays,
    pub value_weights: Vec<f64>,
    pub reference: ReferenceModel,
    #[serde(default)]
    pub config: serde_json::Value,
}

impl Checkpoint {
    pub fn from_models(policy: &PolicyModel<f64>, value: &ValueModel<f64>, config: serde_json::Value) -> Self {
        let p = policy.params();
        Self {
            format: CHECKPOINT_FORMAT.to_string(),
            vocabulary: policy.spaces().vocabulary().to_vec(),
            ranges: crate::prompt::ActionSpaces::RANGES.iter().map(|r| r.to_string()).collect(),
            weights: crate::prompt::ActionSpaces::WEIGHTS.to_vec(),
            head_mode: policy.mode(),
            featurizer: *policy.featurizer(),
            params: ParamArrays { word: p.word.clone(), range: p.range.clone(), weight: p.weight.clone() },
            value_weights: value.weights.clone(),
            reference: policy.reference().clone(),
            config,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("checkpoint serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, PolicyError> {
        let ckpt: Self = serde_json::from_str(text).map_err(|e| PolicyError::Checkpoint(e.to_string()))?;
        ckpt.validate()?;
        Ok(ckpt)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), PolicyError> {
        fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, PolicyError> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    fn validate(&self) -> Result<(), PolicyError> {
        let bad = |m: String| Err(PolicyError::Checkpoint(m));
        if self.format != CHECKPOINT_FORMAT {
            return bad(format!("unsupported format {:?}", self.format));
        }
        if self.vocabulary != self.reference.spaces().vocabulary() {
            return bad("vocabulary does not match the reference".into());
        }
        let v = self.reference.spaces().vocab_size();
        let expected = Featurizer::new(v, self.featurizer.context_len);
        if self.featurizer != expected {
            return bad(format!("featurizer {:?} does not match vocabulary of {v}", self.featurizer));
        }
        let dim = expected.dim();
        let shapes = [
            ("word", self.params.word.len(), v * dim),
            ("range", self.params.range.len(), 3 * dim),
            ("weight", self.params.weight.len(), 5 * dim),
            ("value", self.value_weights.len(), dim),
        ];
        for (name, got, want) in shapes {
            if got != want {
                return bad(format!("{name} parameters have length {got}, expected {want}"));
            }
        }
        let all = self.params.word.iter().chain(&self.params.range).chain(&self.params.weight).chain(&self.value_weights);
        if all.clone().any(|x| !x.is_finite()) {
            return bad("non-finite parameter".into());
        }
        Ok(())
    }

    pub fn into_models(self) -> (PolicyModel<f64>, ValueModel<f64>) {
        let mut policy = PolicyModel::from_reference(Arc::new(self.reference), self.featurizer.context_len, self.head_mode);
        *policy.params_mut() = PolicyParams { word: self.params.word, range: self.params.range, weight: self.params.weight };
        let mut value = ValueModel::new(self.featurizer);
        value.weights = self.value_weights;
        (policy, value)
    }
}
