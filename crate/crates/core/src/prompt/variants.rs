use std::fmt;

use serde::{Deserialize, Serialize};

/// The completion suffix shared by every non-format variant.
pub const JSON_SUFFIX: &str = "{\"decision\": \"";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VariantName {
    Standard,
    PredictHuman,
    Observer,
    ReversedRoles,
    Naive,
    Expert,
    Fairness,
    Selfish,
    Emotional,
    NaturalLanguage,
    Simplified,
    Minimal,
    NumbersOnly,
    PreambleReversed,
}

impl VariantName {
    pub fn as_str(self) -> &'static str {
        match self {
            VariantName::Standard => "standard",
            VariantName::PredictHuman => "predict_human",
            VariantName::Observer => "observer",
            VariantName::ReversedRoles => "reversed_roles",
            VariantName::Naive => "naive",
            VariantName::Expert => "expert",
            VariantName::Fairness => "fairness",
            VariantName::Selfish => "selfish",
            VariantName::Emotional => "emotional",
            VariantName::NaturalLanguage => "natural_language",
            VariantName::Simplified => "simplified",
            VariantName::Minimal => "minimal",
            VariantName::NumbersOnly => "numbers_only",
            VariantName::PreambleReversed => "preamble_reversed",
        }
    }
}

impl fmt::Display for VariantName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for VariantName {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        serde_json::from_value(serde_json::Value::String(s.to_string()))
            .map_err(|_| format!("unknown prompt variant `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VariantCluster {
    Baseline,
    Framing,
    Persona,
    Format,
    Structure,
}

impl VariantCluster {
    pub fn as_str(self) -> &'static str {
        match self {
            VariantCluster::Baseline => "baseline",
            VariantCluster::Framing => "framing",
            VariantCluster::Persona => "persona",
            VariantCluster::Format => "format",
            VariantCluster::Structure => "structure",
        }
    }
}

/// One prompt formulation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptVariant {
    pub name: VariantName,
    pub cluster: VariantCluster,
    /// Text the prompt ends with; the model completes right after it.
    pub suffix: String,
    /// Sentence placed in front of the family's system message.
    #[serde(default)]
    pub system_prefix: Option<String>,
    #[serde(default)]
    pub drops_history: bool,
    #[serde(default)]
    pub swaps_label_order: bool,
    /// Unstructured suffixes tend to pull probability mass away from the
    /// decision tokens.
    #[serde(default)]
    pub low_mass_risk: bool,
}

impl PromptVariant {
    pub fn uses_json_suffix(&self) -> bool {
        self.suffix == JSON_SUFFIX
    }
}

fn variant(
    name: VariantName,
    cluster: VariantCluster,
    suffix: &str,
    system_prefix: Option<&str>,
) -> PromptVariant {
    PromptVariant {
        name,
        cluster,
        suffix: suffix.to_string(),
        system_prefix: system_prefix.map(str::to_string),
        drops_history: false,
        swaps_label_order: false,
        low_mass_risk: cluster == VariantCluster::Format,
    }
}

/// The built-in variant table: the baseline plus thirteen reformulations.
pub fn list_variants() -> Vec<PromptVariant> {
    use VariantCluster as C;
    use VariantName as N;
    let mut out = vec![
        variant(N::Standard, C::Baseline, JSON_SUFFIX, None),
        variant(
            N::PredictHuman,
            C::Framing,
            JSON_SUFFIX,
            Some("Predict what a participant decided in the following game."),
        ),
        variant(
            N::Observer,
            C::Framing,
            JSON_SUFFIX,
            Some("You are an external observer watching the following game and recording the decision that was made."),
        ),
        variant(
            N::ReversedRoles,
            C::Framing,
            JSON_SUFFIX,
            Some("You are the offeror in the following game, predicting how the receiver responded to your offer."),
        ),
        variant(
            N::Naive,
            C::Persona,
            JSON_SUFFIX,
            Some("You have no prior experience with games like this one."),
        ),
        variant(
            N::Expert,
            C::Persona,
            JSON_SUFFIX,
            Some("You are a behavioral economics researcher."),
        ),
        variant(N::Fairness, C::Persona, JSON_SUFFIX, Some("You value fairness.")),
        variant(
            N::Selfish,
            C::Persona,
            JSON_SUFFIX,
            Some("Your only goal is to maximize personal gain."),
        ),
        variant(
            N::Emotional,
            C::Persona,
            JSON_SUFFIX,
            Some("You decide based on your gut feeling."),
        ),
        variant(N::NaturalLanguage, C::Format, "The decision is: ", None),
        variant(N::Simplified, C::Format, "Answer: ", None),
        variant(N::Minimal, C::Format, "I ", None),
        variant(N::NumbersOnly, C::Structure, JSON_SUFFIX, None),
        variant(N::PreambleReversed, C::Structure, JSON_SUFFIX, None),
    ];
    for v in &mut out {
        match v.name {
            N::NumbersOnly => v.drops_history = true,
            N::PreambleReversed => v.swaps_label_order = true,
            _ => {}
        }
    }
    out
}

/// Looks up a variant by name in the built-in table.
pub fn variant_by_name(name: VariantName) -> PromptVariant {
    list_variants()
        .into_iter()
        .find(|v| v.name == name)
        .expect("every variant name has a table entry")
}

/// An override table as read from a TOML file: `[[variant]]` entries.
#[derive(Debug, Clone, Deserialize)]
pub struct VariantTableFile {
    #[serde(rename = "variant")]
    pub variants: Vec<PromptVariant>,
}
