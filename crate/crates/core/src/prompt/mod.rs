//! Deterministic prompt rendering for decision points.
//!
//! A prompt is a system message (game rules and the participant's role)
//! followed by one or more user/assistant messages holding the history and
//! the decision instructions. The standard format concatenates these as
//! plain text; the chat format wraps them in a model's chat template. In both
//! cases the text ends with the variant's completion suffix.

mod template;
mod variants;

pub use template::{
    apply_chat_template, render_chat, ChatMessage, ChatRole, ChatTemplateSpec, TemplateError,
    TemplateSet,
};
pub use variants::{
    list_variants, variant_by_name, PromptVariant, VariantCluster, VariantName, VariantTableFile,
    JSON_SUFFIX,
};

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::game_model::{
    DecisionPoint, FamilyConfig, GameFamily, Information, LotteryOutcome, MessageType, Money, Turn,
};

/// Version tag of the built-in system-message texts.
pub const PROMPT_SET_VERSION: &str = "v1";

const EMPTY_DIALOGUE: &str = "Dialogue so far:\n(no messages yet)";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptFormat {
    /// Plain text completion.
    Standard,
    /// Wrapped in a chat template.
    Chat,
}

impl PromptFormat {
    pub fn as_str(self) -> &'static str {
        match self {
            PromptFormat::Standard => "standard",
            PromptFormat::Chat => "chat",
        }
    }
}

impl fmt::Display for PromptFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RenderedPrompt {
    pub text: String,
    pub format: PromptFormat,
    pub variant: VariantName,
    pub decision_point_id: String,
    /// Decision labels in the order the prompt lists them.
    pub expected_labels: Vec<String>,
    pub affirmative_label: String,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PromptError {
    #[error("chat format requested for `{decision_point}` but no chat template was given")]
    MissingTemplate { decision_point: String },
    #[error("variant `{variant}` is not enabled for family {family}")]
    IncompatibleVariant {
        variant: VariantName,
        family: GameFamily,
    },
}

/// Renders decision points into prompt text.
#[derive(Debug, Clone, Default)]
pub struct PromptBuilder {
    all_variants_everywhere: bool,
}

impl PromptBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Allows every variant for the matrix and lottery families, which
    /// otherwise accept only the baseline formulation.
    pub fn allow_all_variants(mut self, yes: bool) -> Self {
        self.all_variants_everywhere = yes;
        self
    }

    pub fn supports(&self, family: GameFamily, variant: VariantName) -> bool {
        variant == VariantName::Standard
            || self.all_variants_everywhere
            || matches!(
                family,
                GameFamily::Bargaining | GameFamily::Negotiation | GameFamily::Persuasion
            )
    }

    pub fn build_prompt(
        &self,
        dp: &DecisionPoint,
        variant: &PromptVariant,
        format: PromptFormat,
        template: Option<&ChatTemplateSpec>,
    ) -> Result<RenderedPrompt, PromptError> {
        if !self.supports(dp.family, variant.name) {
            return Err(PromptError::IncompatibleVariant {
                variant: variant.name,
                family: dp.family,
            });
        }
        let template = match (format, template) {
            (PromptFormat::Chat, None) => {
                return Err(PromptError::MissingTemplate {
                    decision_point: dp.id.clone(),
                })
            }
            (PromptFormat::Chat, Some(t)) => Some(t),
            (PromptFormat::Standard, _) => None,
        };

        let labels = ordered_labels(dp, variant.swaps_label_order);
        let system = system_message(dp, variant);
        let messages = body_messages(dp, variant, &labels);

        let text = match template {
            None => {
                let mut out = system;
                for m in &messages {
                    out.push_str("\n\n");
                    out.push_str(&m.content);
                }
                out.push('\n');
                out.push_str(&variant.suffix);
                out
            }
            Some(t) => {
                let mut out = render_chat(&system, &messages, t);
                out.push_str(&variant.suffix);
                out
            }
        };

        Ok(RenderedPrompt {
            text,
            format,
            variant: variant.name,
            decision_point_id: dp.id.clone(),
            expected_labels: labels,
            affirmative_label: dp.affirmative_label.clone(),
        })
    }
}

/// Renders with the default builder.
pub fn build_prompt(
    dp: &DecisionPoint,
    variant: &PromptVariant,
    format: PromptFormat,
    template: Option<&ChatTemplateSpec>,
) -> Result<RenderedPrompt, PromptError> {
    PromptBuilder::new().build_prompt(dp, variant, format, template)
}

fn ordered_labels(dp: &DecisionPoint, swap: bool) -> Vec<String> {
    let mut labels = dp.decision_labels.clone();
    if swap {
        let aff = labels.iter().position(|l| *l == dp.affirmative_label);
        let other = labels.iter().position(|l| *l != dp.affirmative_label);
        if let (Some(a), Some(o)) = (aff, other) {
            labels.swap(a, o);
        }
    }
    labels
}

fn fill(template: &str, values: &[(&str, String)]) -> String {
    let mut out = template.trim_end().to_string();
    for (key, value) in values {
        out = out.replace(&format!("{{{key}}}"), value);
    }
    out
}

fn num(v: f64) -> String {
    format!("{v}")
}

fn percent(p: f64) -> String {
    let v = (p * 10_000.0).round() / 100.0;
    format!("{v}%")
}

fn scale_money(price: &Money, mult: f64) -> Money {
    Money::new((price.minor as f64 * mult).round() as i64, price.currency.clone())
}

fn information_sentence(info: Information, what: &str) -> String {
    match info {
        Information::Complete => format!("Both players know each other's {what}."),
        Information::Incomplete => format!("Each player knows only their own {what}."),
    }
}

fn messages_sentence(allowed: bool) -> String {
    if allowed {
        "Proposals may be accompanied by a free-text message.".to_string()
    } else {
        "No messages are exchanged beyond the proposals themselves.".to_string()
    }
}

fn payoff_table(
    row: &[[f64; 2]; 2],
    col: &[[f64; 2]; 2],
    row_labels: &[String],
    col_labels: [&str; 2],
    swap_rows: bool,
) -> String {
    let order: [usize; 2] = if swap_rows { [1, 0] } else { [0, 1] };
    let mut lines = Vec::new();
    for i in order {
        for j in 0..2 {
            lines.push(format!(
                "- You choose {}, the other player chooses {}: you get {} points, the other player gets {} points.",
                row_labels[i],
                col_labels[j],
                num(row[i][j]),
                num(col[i][j])
            ));
        }
    }
    lines.join("\n")
}

fn lottery_line(label: &str, outcomes: &[LotteryOutcome]) -> String {
    let parts: Vec<String> = outcomes
        .iter()
        .map(|o| format!("{} with probability {}", o.outcome, percent(o.prob)))
        .collect();
    format!("Lottery {label}: {}", parts.join(", "))
}

fn system_message(dp: &DecisionPoint, variant: &PromptVariant) -> String {
    let labels = &dp.decision_labels;
    let rules = match &dp.config {
        FamilyConfig::Bargaining(c) => fill(
            include_str!("../../prompts/v1/bargaining.txt"),
            &[
                ("stakes", c.stakes.to_string()),
                ("delta1", num(c.delta1)),
                ("delta2", num(c.delta2)),
                ("information", information_sentence(c.information, "discount factors")),
                ("messages", messages_sentence(c.messages_allowed)),
                (
                    "rounds",
                    match c.max_rounds {
                        Some(n) => format!("The game lasts at most {n} rounds."),
                        None => "There is no limit on the number of rounds.".to_string(),
                    },
                ),
            ],
        ),
        FamilyConfig::Persuasion(c) => fill(
            include_str!("../../prompts/v1/persuasion.txt"),
            &[
                ("price", c.price.to_string()),
                ("quality_prob", num(c.quality_prob_p)),
                ("value_v", num(c.value_v)),
                (
                    "seller_knowledge",
                    if c.seller_knows_quality {
                        "The seller observes the product's quality before sending a message."
                    } else {
                        "The seller does not observe the product's quality."
                    }
                    .to_string(),
                ),
                (
                    "message_type",
                    match c.message_type {
                        MessageType::Text => "free-text",
                        MessageType::Binary => "binary (high or low quality)",
                    }
                    .to_string(),
                ),
                (
                    "buyer_view",
                    if c.buyer_myopic {
                        "Every round is played by a new buyer, who sees only summary statistics of the seller's past rounds."
                    } else {
                        "The same buyer plays every round and sees the full history."
                    }
                    .to_string(),
                ),
            ],
        ),
        FamilyConfig::Negotiation(c) => fill(
            include_str!("../../prompts/v1/negotiation.txt"),
            &[
                ("seller_value", scale_money(&c.price, c.seller_value_mult).to_string()),
                ("buyer_value", scale_money(&c.price, c.buyer_value_mult).to_string()),
                ("information", information_sentence(c.information, "valuations")),
                ("messages", messages_sentence(c.messages_allowed)),
                ("rounds", c.max_rounds.to_string()),
            ],
        ),
        FamilyConfig::MatrixRepeated(c) => fill(
            include_str!("../../prompts/v1/matrix_repeated.txt"),
            &[
                ("rounds", c.total_rounds.to_string()),
                ("label1", labels[0].clone()),
                ("label2", labels[1].clone()),
                (
                    "payoff_table",
                    payoff_table(
                        &c.row_payoffs,
                        &c.col_payoffs,
                        labels,
                        [labels[0].as_str(), labels[1].as_str()],
                        false,
                    ),
                ),
            ],
        ),
        FamilyConfig::MatrixOneshot(g) => {
            let (l1, l2) = if g.counterbalanced {
                (labels[1].clone(), labels[0].clone())
            } else {
                (labels[0].clone(), labels[1].clone())
            };
            fill(
                include_str!("../../prompts/v1/matrix_oneshot.txt"),
                &[
                    ("label1", l1),
                    ("label2", l2),
                    (
                        "payoff_table",
                        payoff_table(&g.row_payoffs, &g.col_payoffs, labels, ["X", "Y"], g.counterbalanced),
                    ),
                ],
            )
        }
        FamilyConfig::Lottery(c) => fill(
            include_str!("../../prompts/v1/lottery.txt"),
            &[(
                "lottery_table",
                format!(
                    "{}\n{}",
                    lottery_line(&labels[0], &c.option_a),
                    lottery_line(&labels[1], &c.option_b)
                ),
            )],
        ),
    };
    let mut out = String::new();
    if let Some(prefix) = &variant.system_prefix {
        out.push_str(prefix);
        out.push(' ');
    }
    out.push_str(&rules);
    if !dp.role.is_empty() {
        out.push_str(&format!("\nYou play as {}.", dp.role));
    }
    out
}

fn json_scalar(v: &serde_json::Value) -> String {
    match v {
        serde_json::Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

fn action_text(turn: &Turn) -> Option<String> {
    let action = turn.structured_action.as_ref().filter(|m| !m.is_empty())?;
    let parts: Vec<String> = action
        .iter()
        .map(|(k, v)| format!("{k}: {}", json_scalar(v)))
        .collect();
    Some(parts.join(", "))
}

fn turn_line(turn: &Turn) -> String {
    match (turn.text.is_empty(), action_text(turn)) {
        (false, Some(a)) => format!("{}: {} [{a}]", turn.speaker, turn.text),
        (false, None) => format!("{}: {}", turn.speaker, turn.text),
        (true, Some(a)) => format!("{}: [{a}]", turn.speaker),
        (true, None) => format!("{}:", turn.speaker),
    }
}

fn dialogue_section(history: &[Turn]) -> String {
    if history.is_empty() {
        return EMPTY_DIALOGUE.to_string();
    }
    let lines: Vec<String> = history.iter().map(turn_line).collect();
    format!("Dialogue so far:\n{}", lines.join("\n"))
}

/// The structured numbers of the history, without any free text.
fn numeric_section(history: &[Turn]) -> Option<String> {
    let lines: Vec<String> = history
        .iter()
        .filter_map(|t| action_text(t).map(|a| format!("{}: {a}", t.speaker)))
        .collect();
    if lines.is_empty() {
        None
    } else {
        Some(format!("Numbers so far:\n{}", lines.join("\n")))
    }
}

fn quoted_list(labels: &[String]) -> String {
    let quoted: Vec<String> = labels.iter().map(|l| format!("\"{l}\"")).collect();
    match quoted.len() {
        0 => String::new(),
        1 => quoted[0].clone(),
        n => format!("{} or {}", quoted[..n - 1].join(", "), quoted[n - 1]),
    }
}

fn decision_preamble(dp: &DecisionPoint, variant: &PromptVariant, labels: &[String]) -> String {
    let question = match dp.family {
        GameFamily::Bargaining => "It is your turn to respond to the latest proposal.".to_string(),
        GameFamily::Persuasion => {
            format!("Round {}: decide whether to buy the product.", dp.round_index)
        }
        GameFamily::Negotiation => "It is your turn to respond to the latest price proposal.".to_string(),
        GameFamily::MatrixRepeated => format!("Round {}: choose your option.", dp.round_index),
        GameFamily::MatrixOneshot => "Choose your option.".to_string(),
        GameFamily::Lottery => "Choose the lottery you prefer.".to_string(),
    };
    let answer = if variant.uses_json_suffix() {
        "Reply with a JSON object of the form {\"decision\": \"<your decision>\"}."
    } else {
        "Reply with your decision only."
    };
    format!("{question}\nPossible decisions: {}.\n{answer}", quoted_list(labels))
}

fn body_messages(dp: &DecisionPoint, variant: &PromptVariant, labels: &[String]) -> Vec<ChatMessage> {
    let preamble = decision_preamble(dp, variant, labels);
    // One-shot problems have no dialogue; show one only if the record has turns.
    let has_history_section = !dp.family.is_aggregate() || !dp.history.is_empty();

    if variant.drops_history || !has_history_section {
        let mut content = String::new();
        if variant.drops_history {
            if let Some(nums) = numeric_section(&dp.history) {
                content.push_str(&nums);
                content.push_str("\n\n");
            }
        }
        content.push_str(&preamble);
        return vec![ChatMessage::user(content)];
    }

    if dp.family == GameFamily::MatrixRepeated {
        // One message per past move; the participant's own moves are
        // presented as assistant turns.
        let mut out: Vec<ChatMessage> = dp
            .history
            .iter()
            .map(|t| {
                if t.speaker == dp.role {
                    ChatMessage::assistant(turn_line(t))
                } else {
                    ChatMessage::user(turn_line(t))
                }
            })
            .collect();
        out.push(ChatMessage::user(preamble));
        return out;
    }

    vec![ChatMessage::user(format!(
        "{}\n\n{preamble}",
        dialogue_section(&dp.history)
    ))]
}
