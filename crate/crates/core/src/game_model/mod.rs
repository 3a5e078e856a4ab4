//! Canonical data model for the six decision datasets.
//!
//! Every dataset is a list of [`DecisionPoint`]s. The four multi-round
//! families carry one record per individual human decision; the two
//! aggregate families (`matrix_oneshot`, `lottery`) carry one record per
//! problem together with the empirical choice rate across participants.

mod config;
mod dataset;
mod money;
mod registry;

pub use config::{
    BargainingConfig, BuyerValueAsymmetry, FamilyConfig, Information, LotteryConfig, LotteryOutcome,
    LotteryProblem, MatrixGame2x2, MatrixRepeatedConfig, MessageType, NegotiationConfig,
    PersuasionConfig, RepeatedGameKind, Topology,
};
pub use dataset::{
    load_dataset, manifest_path_for, write_dataset, DatasetError, DatasetManifest,
    DATASET_SCHEMA_VERSION,
};
pub use money::Money;
pub use registry::{load_registry, PairRegistry, PairSpec, RegistryError};

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

/// Game family tag. Determines label arity and correlation level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GameFamily {
    Bargaining,
    Persuasion,
    Negotiation,
    MatrixRepeated,
    MatrixOneshot,
    Lottery,
}

/// Whether correlations are computed against individual coded choices or
/// against per-problem aggregate choice rates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorrelationLevel {
    Decision,
    Aggregate,
}

impl GameFamily {
    pub const ALL: [GameFamily; 6] = [
        GameFamily::Bargaining,
        GameFamily::Persuasion,
        GameFamily::Negotiation,
        GameFamily::MatrixRepeated,
        GameFamily::MatrixOneshot,
        GameFamily::Lottery,
    ];

    /// The four multi-round families that make up the main comparison.
    pub const MULTI_ROUND: [GameFamily; 4] = [
        GameFamily::Bargaining,
        GameFamily::Persuasion,
        GameFamily::Negotiation,
        GameFamily::MatrixRepeated,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            GameFamily::Bargaining => "bargaining",
            GameFamily::Persuasion => "persuasion",
            GameFamily::Negotiation => "negotiation",
            GameFamily::MatrixRepeated => "matrix_repeated",
            GameFamily::MatrixOneshot => "matrix_oneshot",
            GameFamily::Lottery => "lottery",
        }
    }

    pub fn label_arity(self) -> usize {
        match self {
            GameFamily::Negotiation => 3,
            _ => 2,
        }
    }

    pub fn correlation_level(self) -> CorrelationLevel {
        match self {
            GameFamily::MatrixOneshot | GameFamily::Lottery => CorrelationLevel::Aggregate,
            _ => CorrelationLevel::Decision,
        }
    }

    pub fn is_aggregate(self) -> bool {
        self.correlation_level() == CorrelationLevel::Aggregate
    }

    /// Default (labels, affirmative) used by fixtures and the synthetic corpus.
    pub fn default_labels(self) -> (Vec<String>, String) {
        let (labels, aff): (&[&str], &str) = match self {
            GameFamily::Bargaining => (&["accept", "reject"], "accept"),
            GameFamily::Persuasion => (&["yes", "no"], "yes"),
            GameFamily::Negotiation => {
                (&["AcceptOffer", "RejectOffer", "DealWithJohn"], "AcceptOffer")
            }
            GameFamily::MatrixRepeated => (&["cooperate", "defect"], "cooperate"),
            GameFamily::MatrixOneshot => (&["A", "B"], "A"),
            GameFamily::Lottery => (&["A", "B"], "A"),
        };
        (
            labels.iter().map(|s| s.to_string()).collect(),
            aff.to_string(),
        )
    }
}

impl fmt::Display for GameFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for GameFamily {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        GameFamily::ALL
            .iter()
            .copied()
            .find(|f| f.as_str() == s)
            .ok_or_else(|| format!("unknown game family `{s}`"))
    }
}

/// One dialogue turn preceding a decision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Turn {
    pub speaker: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub structured_action: Option<BTreeMap<String, serde_json::Value>>,
}

impl Turn {
    pub fn validate(&self) -> Result<(), InvariantError> {
        if self.speaker.trim().is_empty() {
            return Err(InvariantError::new("history.speaker", "speaker must be nonempty"));
        }
        let has_action = self
            .structured_action
            .as_ref()
            .is_some_and(|m| !m.is_empty());
        if self.text.is_empty() && !has_action {
            return Err(InvariantError::new(
                "history",
                "turn needs text or a structured action",
            ));
        }
        Ok(())
    }
}

/// Violation of a data-model invariant, naming the offending field.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("field `{field}`: {message}")]
pub struct InvariantError {
    pub field: String,
    pub message: String,
}

impl InvariantError {
    pub fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            field: field.into(),
            message: message.into(),
        }
    }
}

/// Error returned when coding a label that the decision point does not know.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("label `{label}` is not a decision label of `{decision_point}`")]
pub struct UnknownLabel {
    pub decision_point: String,
    pub label: String,
}

/// One human choice in context.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionPoint {
    pub id: String,
    pub family: GameFamily,
    pub config: FamilyConfig,
    pub round_index: u32,
    pub role: String,
    pub history: Vec<Turn>,
    pub decision_labels: Vec<String>,
    pub affirmative_label: String,
    pub human_choice: String,
    pub aggregate_choice_rate: Option<f64>,
    pub n_participants: Option<u32>,
}

impl DecisionPoint {
    /// Checks every invariant of the record.
    pub fn validate(&self) -> Result<(), InvariantError> {
        if self.id.is_empty() {
            return Err(InvariantError::new("id", "must be nonempty"));
        }
        if self.config.family() != self.family {
            return Err(InvariantError::new(
                "config",
                format!(
                    "config is for {} but record family is {}",
                    self.config.family(),
                    self.family
                ),
            ));
        }
        self.config.validate()?;
        if self.round_index < 1 {
            return Err(InvariantError::new("round_index", "must be >= 1"));
        }
        if self.family == GameFamily::MatrixRepeated && self.round_index > 10 {
            return Err(InvariantError::new(
                "round_index",
                format!("repeated matrix games have at most 10 rounds, got {}", self.round_index),
            ));
        }
        let arity = self.family.label_arity();
        if self.decision_labels.len() != arity {
            return Err(InvariantError::new(
                "decision_labels",
                format!(
                    "{} requires {arity} labels, got {}",
                    self.family,
                    self.decision_labels.len()
                ),
            ));
        }
        for (i, l) in self.decision_labels.iter().enumerate() {
            if l.is_empty() {
                return Err(InvariantError::new("decision_labels", "labels must be nonempty"));
            }
            if self.decision_labels[..i].contains(l) {
                return Err(InvariantError::new(
                    "decision_labels",
                    format!("duplicate label `{l}`"),
                ));
            }
        }
        if !self.decision_labels.contains(&self.affirmative_label) {
            return Err(InvariantError::new(
                "affirmative_label",
                format!("`{}` is not one of the decision labels", self.affirmative_label),
            ));
        }
        if !self.decision_labels.contains(&self.human_choice) {
            return Err(InvariantError::new(
                "human_choice",
                format!("`{}` is not one of the decision labels", self.human_choice),
            ));
        }
        match (self.family.is_aggregate(), self.aggregate_choice_rate) {
            (true, None) => {
                return Err(InvariantError::new(
                    "aggregate_choice_rate",
                    format!("required for {}", self.family),
                ))
            }
            (false, Some(_)) => {
                return Err(InvariantError::new(
                    "aggregate_choice_rate",
                    format!("not allowed for decision-level family {}", self.family),
                ))
            }
            (true, Some(rate)) => {
                if !(0.0..=1.0).contains(&rate) {
                    return Err(InvariantError::new(
                        "aggregate_choice_rate",
                        format!("{rate} is outside [0, 1]"),
                    ));
                }
                match self.n_participants {
                    Some(n) if n >= 1 => {}
                    _ => {
                        return Err(InvariantError::new(
                            "n_participants",
                            "aggregate records need n_participants >= 1",
                        ))
                    }
                }
            }
            (false, None) => {}
        }
        for turn in &self.history {
            turn.validate()?;
        }
        Ok(())
    }

    /// Codes a label as 1 (affirmative) or 0 (any other label).
    ///
    /// For negotiation both `RejectOffer` and `DealWithJohn` map to 0.
    pub fn code_decision(&self, label: &str) -> Result<u8, UnknownLabel> {
        if !self.decision_labels.iter().any(|l| l == label) {
            return Err(UnknownLabel {
                decision_point: self.id.clone(),
                label: label.to_string(),
            });
        }
        Ok(u8::from(label == self.affirmative_label))
    }

    /// The value a model prediction is correlated against: the coded human
    /// choice for decision-level families, the aggregate rate otherwise.
    pub fn human_target(&self) -> f64 {
        match self.family.correlation_level() {
            CorrelationLevel::Decision => {
                if self.human_choice == self.affirmative_label {
                    1.0
                } else {
                    0.0
                }
            }
            CorrelationLevel::Aggregate => self.aggregate_choice_rate.unwrap_or(f64::NAN),
        }
    }
}

/// Free-function form of [`DecisionPoint::code_decision`].
pub fn code_decision(dp: &DecisionPoint, label: &str) -> Result<u8, UnknownLabel> {
    dp.code_decision(label)
}
