use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{prompt_hash, LogprobBackend, ProviderError, TokenDistribution};
use crate::prompt::RenderedPrompt;

/// Non-decision tokens that soak up the remaining probability.
const FILLER: [&str; 5] = ["\n", "the", " I", "{", "."];

/// Share of a label's mass emitted under the exact surface form; the rest
/// goes to the leading-space form.
const EXACT_SHARE: f64 = 0.8;

/// How a mock model turns a prompt into an affirmative probability.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MockBehavior {
    /// Fixed affirmative probability.
    Constant { affirmative_prob: f64, mass: f64 },
    /// `logistic(slope * (x - midpoint))` where `x` is the last numeric value
    /// written as `feature: x` in the prompt text.
    Logistic {
        feature: String,
        slope: f64,
        midpoint: f64,
        mass: f64,
    },
    /// Affirmative probability drawn uniformly from a hash of the prompt.
    Noise { mass: f64 },
}

impl MockBehavior {
    fn mass(&self) -> f64 {
        match self {
            MockBehavior::Constant { mass, .. }
            | MockBehavior::Logistic { mass, .. }
            | MockBehavior::Noise { mass } => *mass,
        }
    }

    fn affirmative_prob(&self, model_id: &str, text: &str) -> f64 {
        match self {
            MockBehavior::Constant { affirmative_prob, .. } => *affirmative_prob,
            MockBehavior::Logistic {
                feature,
                slope,
                midpoint,
                ..
            } => match last_feature_value(text, feature) {
                Some(x) => 1.0 / (1.0 + (-slope * (x - midpoint)).exp()),
                None => 0.5,
            },
            MockBehavior::Noise { .. } => {
                let mut h = Sha256::new();
                h.update(model_id.as_bytes());
                h.update([0u8]);
                h.update(text.as_bytes());
                let digest = h.finalize();
                let mut b = [0u8; 8];
                b.copy_from_slice(&digest[..8]);
                (u64::from_le_bytes(b) >> 11) as f64 / (1u64 << 53) as f64
            }
        }
    }

    fn validate(&self) -> Result<(), String> {
        let mass = self.mass();
        if !(0.0..=1.0).contains(&mass) {
            return Err(format!("mass {mass} is outside [0, 1]"));
        }
        if let MockBehavior::Constant { affirmative_prob, .. } = self {
            if !(0.0..=1.0).contains(affirmative_prob) {
                return Err(format!("affirmative_prob {affirmative_prob} is outside [0, 1]"));
            }
        }
        Ok(())
    }
}

/// Finds the last `feature: <number>` in `text`.
fn last_feature_value(text: &str, feature: &str) -> Option<f64> {
    let needle = format!("{feature}: ");
    let mut found = None;
    let mut from = 0;
    while let Some(pos) = text[from..].find(&needle) {
        let start = from + pos + needle.len();
        let num: String = text[start..]
            .chars()
            .take_while(|c| c.is_ascii_digit() || matches!(c, '-' | '+' | '.' | 'e' | 'E'))
            .collect();
        if let Ok(v) = num.parse::<f64>() {
            found = Some(v);
        }
        from = start;
    }
    found
}

/// Offline backend whose output is a pure function of the model id and the
/// rendered prompt.
#[derive(Debug, Clone, Default)]
pub struct MockBackend {
    models: BTreeMap<String, MockBehavior>,
}

impl MockBackend {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers the built-in `always-accept` model (affirmative probability
    /// 1, decision mass 0.9).
    pub fn with_builtins() -> Self {
        let mut m = Self::new();
        m.models.insert(
            "always-accept".into(),
            MockBehavior::Constant {
                affirmative_prob: 1.0,
                mass: 0.9,
            },
        );
        m
    }

    pub fn insert(&mut self, model_id: impl Into<String>, behavior: MockBehavior) -> Result<(), ProviderError> {
        let model_id = model_id.into();
        behavior
            .validate()
            .map_err(|m| ProviderError::Config(format!("mock model `{model_id}`: {m}")))?;
        self.models.insert(model_id, behavior);
        Ok(())
    }

    pub fn contains(&self, model_id: &str) -> bool {
        self.models.contains_key(model_id)
    }

    fn behavior(&self, model_id: &str) -> Result<&MockBehavior, ProviderError> {
        self.models
            .get(model_id)
            .ok_or_else(|| ProviderError::Config(format!("no mock behavior configured for `{model_id}`")))
    }
}

impl LogprobBackend for MockBackend {
    fn next_token_logprobs(
        &self,
        model_id: &str,
        prompt: &RenderedPrompt,
        k: usize,
    ) -> Result<TokenDistribution, ProviderError> {
        let behavior = self.behavior(model_id)?;
        let mass = behavior.mass();
        let p = behavior.affirmative_prob(model_id, &prompt.text).clamp(0.0, 1.0);
        let others = prompt.expected_labels.len().saturating_sub(1).max(1) as f64;

        let mut probs: Vec<(String, f64)> = Vec::new();
        for label in &prompt.expected_labels {
            let m = if *label == prompt.affirmative_label {
                mass * p
            } else {
                mass * (1.0 - p) / others
            };
            probs.push((label.clone(), m * EXACT_SHARE));
            probs.push((format!(" {label}"), m * (1.0 - EXACT_SHARE)));
        }
        let rest = (1.0 - mass) / FILLER.len() as f64;
        for f in FILLER {
            probs.push((f.to_string(), rest));
        }
        let entries = probs
            .into_iter()
            .filter(|(_, q)| *q > 0.0)
            .map(|(t, q)| (t, q.ln()))
            .collect();
        TokenDistribution::new(entries, model_id, prompt_hash(&prompt.text), Some(k))
    }

    fn probe(&self, model_id: &str) -> Result<(), ProviderError> {
        self.behavior(model_id).map(|_| ())
    }
}
