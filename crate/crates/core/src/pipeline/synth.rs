//! Seeded synthetic corpus with a known behavioral signal.
//!
//! Every decision point carries a latent `signal` in `[0, 1]` in its
//! history. Humans choose the affirmative label with probability
//! `logistic(40 (signal - 0.5))`. The generated config pairs a mock model
//! that follows exactly this rule with a mock model that emits noise, once
//! with each in the base role.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::game_model::{
    write_dataset, BargainingConfig, DecisionPoint, FamilyConfig, GameFamily, Information, LotteryConfig,
    LotteryOutcome, MatrixGame2x2, MatrixRepeatedConfig, MessageType, Money, NegotiationConfig, PairRegistry,
    PairSpec, PersuasionConfig, RepeatedGameKind, Topology, Turn,
};

use super::{io_err, PipelineError};

/// Name of the structured history field holding the latent signal.
pub const SYNTH_FEATURE: &str = "signal";
const SLOPE: f64 = 40.0;
const MIDPOINT: f64 = 0.5;

#[derive(Debug, Clone)]
pub struct SynthOptions {
    pub seed: u64,
    /// Decision points per family.
    pub counts: BTreeMap<GameFamily, usize>,
}

impl Default for SynthOptions {
    /// 500 decisions over the six families.
    fn default() -> Self {
        let counts = [
            (GameFamily::Bargaining, 100),
            (GameFamily::Persuasion, 100),
            (GameFamily::Negotiation, 100),
            (GameFamily::MatrixRepeated, 80),
            (GameFamily::MatrixOneshot, 60),
            (GameFamily::Lottery, 60),
        ]
        .into_iter()
        .collect();
        Self { seed: 1, counts }
    }
}

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn pick<T: Copy>(rng: &mut ChaCha8Rng, items: &[T]) -> T {
    items[rng.random_range(0..items.len())]
}

fn family_config(family: GameFamily, rng: &mut ChaCha8Rng, i: usize) -> FamilyConfig {
    let info = pick(rng, &[Information::Complete, Information::Incomplete]);
    match family {
        GameFamily::Bargaining => FamilyConfig::Bargaining(BargainingConfig {
            stakes: Money::usd_whole(pick(rng, &[100, 10_000, 1_000_000])),
            information: info,
            messages_allowed: rng.random_bool(0.5),
            delta1: pick(rng, &[0.8, 0.9, 0.95, 1.0]),
            delta2: pick(rng, &[0.8, 0.9, 0.95, 1.0]),
            max_rounds: pick(rng, &[Some(12), None]),
            extras: Default::default(),
        }),
        GameFamily::Persuasion => FamilyConfig::Persuasion(PersuasionConfig {
            quality_prob_p: pick(rng, &[0.3, 0.5, 0.8]),
            value_v: pick(rng, &[1.2, 1.5, 2.0]),
            seller_knows_quality: rng.random_bool(0.5),
            buyer_myopic: rng.random_bool(0.5),
            message_type: pick(rng, &[MessageType::Text, MessageType::Binary]),
            price: Money::usd_whole(pick(rng, &[100, 10_000])),
            extras: Default::default(),
        }),
        GameFamily::Negotiation => FamilyConfig::Negotiation(NegotiationConfig {
            price: Money::usd_whole(pick(rng, &[100, 10_000])),
            information: info,
            messages_allowed: rng.random_bool(0.5),
            max_rounds: pick(rng, &[1, 10, 30]),
            buyer_value_mult: pick(rng, &[0.8, 1.0, 1.2, 1.5]),
            seller_value_mult: pick(rng, &[0.8, 1.0, 1.2, 1.5]),
            extras: Default::default(),
        }),
        GameFamily::MatrixRepeated => {
            let (game, row, col) = if rng.random_bool(0.5) {
                (RepeatedGameKind::Pd, [[3.0, 0.0], [5.0, 1.0]], [[3.0, 5.0], [0.0, 1.0]])
            } else {
                (RepeatedGameKind::Bos, [[2.0, 0.0], [0.0, 1.0]], [[1.0, 0.0], [0.0, 2.0]])
            };
            FamilyConfig::MatrixRepeated(MatrixRepeatedConfig {
                game,
                row_payoffs: row,
                col_payoffs: col,
                total_rounds: 10,
                extras: Default::default(),
            })
        }
        GameFamily::MatrixOneshot => {
            let mut m = || -> [[f64; 2]; 2] {
                let mut v = [[0.0; 2]; 2];
                for cell in v.iter_mut().flatten() {
                    *cell = rng.random_range(0..10) as f64;
                }
                v
            };
            let (row, col) = (m(), m());
            let mut g = MatrixGame2x2::new(row, col, Topology::ALL[i % Topology::ALL.len()]);
            g.counterbalanced = i % 2 == 1;
            FamilyConfig::MatrixOneshot(g)
        }
        GameFamily::Lottery => {
            let p = rng.random_range(1..10) as f64 / 10.0;
            let high = Money::usd_whole(rng.random_range(10..100));
            FamilyConfig::Lottery(LotteryConfig {
                option_a: vec![
                    LotteryOutcome { outcome: high, prob: p },
                    LotteryOutcome {
                        outcome: Money::usd_whole(0),
                        prob: 1.0 - p,
                    },
                ],
                option_b: vec![LotteryOutcome {
                    outcome: Money::usd_whole(rng.random_range(5..60)),
                    prob: 1.0,
                }],
                extras: Default::default(),
            })
        }
    }
}

fn roles(family: GameFamily) -> (&'static str, &'static str) {
    match family {
        GameFamily::Bargaining => ("Bob", "Alice"),
        GameFamily::Persuasion => ("the buyer", "Seller"),
        GameFamily::Negotiation => ("the seller", "Buyer"),
        GameFamily::MatrixRepeated => ("the row player", "Other player"),
        GameFamily::MatrixOneshot | GameFamily::Lottery => ("", "Note"),
    }
}

fn max_round(family: GameFamily) -> u32 {
    match family {
        GameFamily::Bargaining => 5,
        GameFamily::Persuasion => 20,
        GameFamily::Negotiation => 10,
        GameFamily::MatrixRepeated => 10,
        GameFamily::MatrixOneshot | GameFamily::Lottery => 1,
    }
}

/// Generates `n` decision points of one family.
pub fn synth_family(family: GameFamily, n: usize, rng: &mut ChaCha8Rng) -> Vec<DecisionPoint> {
    let (labels, aff) = family.default_labels();
    let (role, other) = roles(family);
    (0..n)
        .map(|i| {
            let config = family_config(family, rng, i);
            let round_index = rng.random_range(1..=max_round(family));
            let signal = (rng.random::<f64>() * 1000.0).round() / 1000.0;
            let g = logistic(SLOPE * (signal - MIDPOINT));
            let mut action = BTreeMap::new();
            action.insert(SYNTH_FEATURE.to_string(), serde_json::json!(signal));
            let history = vec![Turn {
                speaker: other.to_string(),
                text: String::new(),
                structured_action: Some(action),
            }];
            let non_aff: Vec<&String> = labels.iter().filter(|l| **l != aff).collect();
            let (human_choice, rate, n_participants) = if family.is_aggregate() {
                let n = rng.random_range(28..=31u32);
                let k = (0..n).filter(|_| rng.random_bool(g)).count();
                let rate = k as f64 / n as f64;
                let choice = if rate >= 0.5 { aff.clone() } else { non_aff[0].clone() };
                (choice, Some(rate), Some(n))
            } else if rng.random_bool(g) {
                (aff.clone(), None, None)
            } else {
                (pick(rng, &non_aff).clone(), None, None)
            };
            DecisionPoint {
                id: format!("{family}-{:04}", i + 1),
                family,
                config,
                round_index,
                role: role.to_string(),
                history,
                decision_labels: labels.clone(),
                affirmative_label: aff.clone(),
                human_choice,
                aggregate_choice_rate: rate,
                n_participants,
            }
        })
        .collect()
}

const CHATML: &str = r#"name = "chatml"
system_open = "<|im_start|>system\n"
system_close = "<|im_end|>"
user_open = "<|im_start|>user\n"
user_close = "<|im_end|>"
assistant_open = "<|im_start|>assistant\n"
turn_separator = "\n"
generation_prefix = "<|im_start|>assistant\n"
"#;

/// Writes datasets, a two-pair registry, a chat template and `run.toml`
/// under `dir`. Returns the config path.
pub fn synth(dir: &Path, opts: &SynthOptions) -> Result<PathBuf, PipelineError> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut datasets = String::new();
    for (&family, &n) in &opts.counts {
        let dps = synth_family(family, n, &mut rng);
        let rel = format!("data/{family}.jsonl");
        write_dataset(&dir.join(&rel), family, &dps).map_err(|e| PipelineError::Io(e.to_string()))?;
        datasets.push_str(&format!("{family} = \"{rel}\"\n"));
    }

    let pair = |id: u32, base: &str, aligned: &str, size: f64| PairSpec {
        pair_id: id,
        base_model_id: base.into(),
        aligned_model_id: aligned.into(),
        provider: "Synthetic".into(),
        param_count: size,
    };
    let registry = PairRegistry {
        schema_version: 1,
        pairs: vec![
            pair(1, "synth-a-base", "synth-b-chat", 2.0),
            pair(2, "synth-b-base", "synth-a-chat", 7.0),
        ],
    };
    let reg_path = dir.join("registry.json");
    let text = serde_json::to_string_pretty(&registry).expect("registry serializes") + "\n";
    fs::write(&reg_path, text).map_err(io_err(&reg_path))?;

    let tdir = dir.join("templates");
    fs::create_dir_all(&tdir).map_err(io_err(&tdir))?;
    let tpath = tdir.join("chatml.toml");
    let template = format!("{CHATML}models = [\"synth-a-chat\", \"synth-b-chat\"]\n");
    fs::write(&tpath, template).map_err(io_err(&tpath))?;

    let signal_model = format!(
        "kind = \"logistic\"\nfeature = \"{SYNTH_FEATURE}\"\nslope = {SLOPE:?}\nmidpoint = {MIDPOINT:?}\nmass = 0.95\n"
    );
    let noise_model = "kind = \"noise\"\nmass = 0.95\n";
    let config = format!(
        "seed = {seed}\noutput_dir = \"out\"\nregistry = \"registry.json\"\ntemplate_dir = \"templates\"\nconcurrency = 4\n\n\
         [datasets]\n{datasets}\n\
         [backend]\nkind = \"mock\"\n\n\
         [backend.models.synth-a-base]\n{signal_model}\n\
         [backend.models.synth-a-chat]\n{signal_model}\n\
         [backend.models.synth-b-base]\n{noise_model}\n\
         [backend.models.synth-b-chat]\n{noise_model}",
        seed = opts.seed,
    );
    let cpath = dir.join("run.toml");
    fs::write(&cpath, config).map_err(io_err(&cpath))?;
    Ok(cpath)
}
