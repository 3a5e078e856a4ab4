use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{DecisionPoint, GameFamily, InvariantError, Money};

/// Unrecognized config keys, kept verbatim.
pub type Extras = BTreeMap<String, serde_json::Value>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Information {
    Complete,
    Incomplete,
}

impl Information {
    pub fn as_str(self) -> &'static str {
        match self {
            Information::Complete => "complete",
            Information::Incomplete => "incomplete",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MessageType {
    Text,
    Binary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BargainingConfig {
    pub stakes: Money,
    pub information: Information,
    pub messages_allowed: bool,
    pub delta1: f64,
    pub delta2: f64,
    /// `None` means no round limit.
    #[serde(default)]
    pub max_rounds: Option<u32>,
    #[serde(flatten)]
    pub extras: Extras,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PersuasionConfig {
    pub quality_prob_p: f64,
    pub value_v: f64,
    pub seller_knows_quality: bool,
    pub buyer_myopic: bool,
    pub message_type: MessageType,
    pub price: Money,
    #[serde(flatten)]
    pub extras: Extras,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NegotiationConfig {
    pub price: Money,
    pub information: Information,
    pub messages_allowed: bool,
    pub max_rounds: u32,
    /// Buyer valuation as a multiple of `price`.
    pub buyer_value_mult: f64,
    /// Seller valuation as a multiple of `price`.
    pub seller_value_mult: f64,
    #[serde(flatten)]
    pub extras: Extras,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BuyerValueAsymmetry {
    BuyerHigher,
    SellerHigher,
    Equal,
}

impl NegotiationConfig {
    pub fn value_asymmetry(&self) -> BuyerValueAsymmetry {
        if self.buyer_value_mult > self.seller_value_mult {
            BuyerValueAsymmetry::BuyerHigher
        } else if self.buyer_value_mult < self.seller_value_mult {
            BuyerValueAsymmetry::SellerHigher
        } else {
            BuyerValueAsymmetry::Equal
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RepeatedGameKind {
    /// Prisoner's Dilemma.
    Pd,
    /// Battle of the Sexes.
    Bos,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixRepeatedConfig {
    pub game: RepeatedGameKind,
    pub row_payoffs: [[f64; 2]; 2],
    pub col_payoffs: [[f64; 2]; 2],
    #[serde(default = "ten")]
    pub total_rounds: u32,
    #[serde(flatten)]
    pub extras: Extras,
}

fn ten() -> u32 {
    10
}

/// The twelve one-shot 2×2 game topologies. Labels come from the source
/// dataset and are not re-derived from payoff orderings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Topology {
    Harmony,
    Concord,
    Peace,
    Safecoord,
    Assurance,
    Dilemma,
    Deadlock,
    Chicken,
    Staghunt,
    Hero,
    Leader,
    Compromise,
}

impl Topology {
    pub const ALL: [Topology; 12] = [
        Topology::Harmony,
        Topology::Concord,
        Topology::Peace,
        Topology::Safecoord,
        Topology::Assurance,
        Topology::Dilemma,
        Topology::Deadlock,
        Topology::Chicken,
        Topology::Staghunt,
        Topology::Hero,
        Topology::Leader,
        Topology::Compromise,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Topology::Harmony => "harmony",
            Topology::Concord => "concord",
            Topology::Peace => "peace",
            Topology::Safecoord => "safecoord",
            Topology::Assurance => "assurance",
            Topology::Dilemma => "dilemma",
            Topology::Deadlock => "deadlock",
            Topology::Chicken => "chicken",
            Topology::Staghunt => "staghunt",
            Topology::Hero => "hero",
            Topology::Leader => "leader",
            Topology::Compromise => "compromise",
        }
    }
}

impl fmt::Display for Topology {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A one-shot 2×2 bimatrix game. `row_payoffs[i][j]` is the row player's
/// payoff when row plays action `i` and column plays action `j`.
///
/// When `counterbalanced` is set the prompt lists the row options in
/// swapped order; payoffs and labels are stored unswapped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixGame2x2 {
    pub row_payoffs: [[f64; 2]; 2],
    pub col_payoffs: [[f64; 2]; 2],
    pub topology: Topology,
    #[serde(default)]
    pub counterbalanced: bool,
    #[serde(flatten)]
    pub extras: Extras,
}

impl MatrixGame2x2 {
    pub fn new(row_payoffs: [[f64; 2]; 2], col_payoffs: [[f64; 2]; 2], topology: Topology) -> Self {
        Self {
            row_payoffs,
            col_payoffs,
            topology,
            counterbalanced: false,
            extras: Extras::new(),
        }
    }

    pub fn payoffs_finite(&self) -> bool {
        self.row_payoffs
            .iter()
            .chain(self.col_payoffs.iter())
            .flatten()
            .all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LotteryOutcome {
    pub outcome: Money,
    pub prob: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LotteryConfig {
    pub option_a: Vec<LotteryOutcome>,
    pub option_b: Vec<LotteryOutcome>,
    #[serde(flatten)]
    pub extras: Extras,
}

/// A lottery choice problem together with its aggregate human choice rate.
#[derive(Debug, Clone, PartialEq)]
pub struct LotteryProblem {
    pub option_a: Vec<LotteryOutcome>,
    pub option_b: Vec<LotteryOutcome>,
    pub choice_rate_a: f64,
    pub n_participants: u32,
}

impl LotteryProblem {
    pub fn from_decision_point(dp: &DecisionPoint) -> Option<Self> {
        match &dp.config {
            FamilyConfig::Lottery(cfg) => Some(Self {
                option_a: cfg.option_a.clone(),
                option_b: cfg.option_b.clone(),
                choice_rate_a: dp.aggregate_choice_rate?,
                n_participants: dp.n_participants?,
            }),
            _ => None,
        }
    }
}

/// Family-specific configuration of a decision point.
#[derive(Debug, Clone, PartialEq)]
pub enum FamilyConfig {
    Bargaining(BargainingConfig),
    Persuasion(PersuasionConfig),
    Negotiation(NegotiationConfig),
    MatrixRepeated(MatrixRepeatedConfig),
    MatrixOneshot(MatrixGame2x2),
    Lottery(LotteryConfig),
}

fn check_discount(field: &str, d: f64) -> Result<(), InvariantError> {
    if d > 0.0 && d <= 1.0 {
        Ok(())
    } else {
        Err(InvariantError::new(field, format!("discount factor {d} outside (0, 1]")))
    }
}

fn check_positive_money(field: &str, m: &Money) -> Result<(), InvariantError> {
    if m.is_positive() {
        Ok(())
    } else {
        Err(InvariantError::new(field, "amount must be positive"))
    }
}

fn check_lottery_option(field: &str, opt: &[LotteryOutcome]) -> Result<(), InvariantError> {
    if opt.is_empty() {
        return Err(InvariantError::new(field, "option has no outcomes"));
    }
    if opt.iter().any(|o| !(0.0..=1.0).contains(&o.prob)) {
        return Err(InvariantError::new(field, "outcome probability outside [0, 1]"));
    }
    let total: f64 = opt.iter().map(|o| o.prob).sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(InvariantError::new(
            field,
            format!("probabilities sum to {total}, expected 1"),
        ));
    }
    Ok(())
}

impl FamilyConfig {
    pub fn family(&self) -> GameFamily {
        match self {
            FamilyConfig::Bargaining(_) => GameFamily::Bargaining,
            FamilyConfig::Persuasion(_) => GameFamily::Persuasion,
            FamilyConfig::Negotiation(_) => GameFamily::Negotiation,
            FamilyConfig::MatrixRepeated(_) => GameFamily::MatrixRepeated,
            FamilyConfig::MatrixOneshot(_) => GameFamily::MatrixOneshot,
            FamilyConfig::Lottery(_) => GameFamily::Lottery,
        }
    }

    pub fn from_json(family: GameFamily, value: serde_json::Value) -> serde_json::Result<Self> {
        Ok(match family {
            GameFamily::Bargaining => FamilyConfig::Bargaining(serde_json::from_value(value)?),
            GameFamily::Persuasion => FamilyConfig::Persuasion(serde_json::from_value(value)?),
            GameFamily::Negotiation => FamilyConfig::Negotiation(serde_json::from_value(value)?),
            GameFamily::MatrixRepeated => {
                FamilyConfig::MatrixRepeated(serde_json::from_value(value)?)
            }
            GameFamily::MatrixOneshot => FamilyConfig::MatrixOneshot(serde_json::from_value(value)?),
            GameFamily::Lottery => FamilyConfig::Lottery(serde_json::from_value(value)?),
        })
    }

    pub fn to_json(&self) -> serde_json::Value {
        let v = match self {
            FamilyConfig::Bargaining(c) => serde_json::to_value(c),
            FamilyConfig::Persuasion(c) => serde_json::to_value(c),
            FamilyConfig::Negotiation(c) => serde_json::to_value(c),
            FamilyConfig::MatrixRepeated(c) => serde_json::to_value(c),
            FamilyConfig::MatrixOneshot(c) => serde_json::to_value(c),
            FamilyConfig::Lottery(c) => serde_json::to_value(c),
        };
        v.expect("config types serialize infallibly")
    }

    pub fn validate(&self) -> Result<(), InvariantError> {
        match self {
            FamilyConfig::Bargaining(c) => {
                check_positive_money("config.stakes", &c.stakes)?;
                check_discount("config.delta1", c.delta1)?;
                check_discount("config.delta2", c.delta2)?;
                if c.max_rounds == Some(0) {
                    return Err(InvariantError::new("config.max_rounds", "must be positive"));
                }
            }
            FamilyConfig::Persuasion(c) => {
                if !(c.quality_prob_p > 0.0 && c.quality_prob_p < 1.0) {
                    return Err(InvariantError::new(
                        "config.quality_prob_p",
                        format!("{} outside (0, 1)", c.quality_prob_p),
                    ));
                }
                if !(c.value_v > 1.0) {
                    return Err(InvariantError::new("config.value_v", "must exceed 1"));
                }
                check_positive_money("config.price", &c.price)?;
            }
            FamilyConfig::Negotiation(c) => {
                check_positive_money("config.price", &c.price)?;
                if c.max_rounds == 0 {
                    return Err(InvariantError::new("config.max_rounds", "must be positive"));
                }
                if !(c.buyer_value_mult > 0.0) || !(c.seller_value_mult > 0.0) {
                    return Err(InvariantError::new(
                        "config.value_mult",
                        "valuation multipliers must be positive",
                    ));
                }
            }
            FamilyConfig::MatrixRepeated(c) => {
                let finite = c
                    .row_payoffs
                    .iter()
                    .chain(c.col_payoffs.iter())
                    .flatten()
                    .all(|v| v.is_finite());
                if !finite {
                    return Err(InvariantError::new("config.payoffs", "payoffs must be finite"));
                }
            }
            FamilyConfig::MatrixOneshot(g) => {
                if !g.payoffs_finite() {
                    return Err(InvariantError::new("config.payoffs", "payoffs must be finite"));
                }
            }
            FamilyConfig::Lottery(c) => {
                check_lottery_option("config.option_a", &c.option_a)?;
                check_lottery_option("config.option_b", &c.option_b)?;
            }
        }
        Ok(())
    }

    /// Named configuration parameters and their values, used for the
    /// per-parameter robustness splits.
    pub fn parameters(&self) -> Vec<(&'static str, String)> {
        fn yes_no(b: bool) -> String {
            if b { "yes" } else { "no" }.to_string()
        }
        match self {
            FamilyConfig::Bargaining(c) => vec![
                ("stakes", c.stakes.to_string()),
                ("information", c.information.as_str().to_string()),
                ("messages_allowed", yes_no(c.messages_allowed)),
                ("delta1", format!("{:?}", c.delta1)),
                ("delta2", format!("{:?}", c.delta2)),
                (
                    "max_rounds",
                    c.max_rounds.map_or("unbounded".to_string(), |r| r.to_string()),
                ),
            ],
            FamilyConfig::Persuasion(c) => vec![
                ("quality_prob_p", format!("{:?}", c.quality_prob_p)),
                ("value_v", format!("{:?}", c.value_v)),
                (
                    "seller_knowledge",
                    if c.seller_knows_quality { "knows" } else { "uninformed" }.to_string(),
                ),
                ("buyer_myopic", yes_no(c.buyer_myopic)),
                (
                    "message_type",
                    match c.message_type {
                        MessageType::Text => "text",
                        MessageType::Binary => "binary",
                    }
                    .to_string(),
                ),
                ("price", c.price.to_string()),
            ],
            FamilyConfig::Negotiation(c) => vec![
                ("information", c.information.as_str().to_string()),
                ("messages_allowed", yes_no(c.messages_allowed)),
                ("max_rounds", c.max_rounds.to_string()),
                ("price", c.price.to_string()),
                (
                    "value_asymmetry",
                    match c.value_asymmetry() {
                        BuyerValueAsymmetry::BuyerHigher => "buyer>seller",
                        BuyerValueAsymmetry::SellerHigher => "seller>buyer",
                        BuyerValueAsymmetry::Equal => "equal",
                    }
                    .to_string(),
                ),
            ],
            FamilyConfig::MatrixRepeated(c) => vec![(
                "game",
                match c.game {
                    RepeatedGameKind::Pd => "pd",
                    RepeatedGameKind::Bos => "bos",
                }
                .to_string(),
            )],
            FamilyConfig::MatrixOneshot(g) => vec![("topology", g.topology.as_str().to_string())],
            FamilyConfig::Lottery(_) => vec![],
        }
    }
}
