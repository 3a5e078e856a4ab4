//! Pairwise base/aligned comparisons and their aggregations.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::equilibrium::{mixed_ne_2x2, ne_alignment};
use crate::filters::{pair_winner, FilterConfig, FilterOutcome, PairStat};
use crate::game_model::{DecisionPoint, FamilyConfig, GameFamily, PairSpec};
use crate::predictor::PredictionRecord;
use crate::report::{fmt_r, TextTable};
use crate::stats::{
    bootstrap_median_ci, pearson, sign_test, wilcoxon_signed_rank, ConfidenceInterval, Direction,
    TestResult, WilcoxonMethod,
};

/// Minimum number of decided pairs for the signed-rank test.
pub const WILCOXON_MIN_N: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Winner {
    Base,
    Aligned,
    Tie,
}

impl From<Direction> for Winner {
    fn from(d: Direction) -> Self {
        match d {
            Direction::First => Winner::Base,
            Direction::Second => Winner::Aligned,
            Direction::Tie => Winner::Tie,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AnalysisError {
    #[error("model `{model}` has no prediction for {} decision point(s): {}", missing.len(), missing.join(", "))]
    Coverage { model: String, missing: Vec<String> },
    #[error("decision points mix families {0} and {1}")]
    MixedFamilies(GameFamily, GameFamily),
    #[error("no decision points to compare")]
    Empty,
}

/// One pair's comparison on one family (or on a subset of its decisions).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyPairResult {
    pub pair: PairSpec,
    pub family: GameFamily,
    pub n_decisions: usize,
    pub base_r: Option<f64>,
    pub aligned_r: Option<f64>,
    pub base_mass: f64,
    pub aligned_mass: f64,
    pub filter: FilterOutcome,
    /// `None` when the pair is excluded by a filter.
    pub winner: Option<Winner>,
}

impl FamilyPairResult {
    pub fn stat(&self) -> PairStat {
        PairStat {
            pair_id: self.pair.pair_id,
            family: self.family,
            base_mass: self.base_mass,
            aligned_mass: self.aligned_mass,
            base_r: self.base_r,
            aligned_r: self.aligned_r,
        }
    }

    /// `base_r - aligned_r` when both sides are defined.
    pub fn diff(&self) -> Option<f64> {
        Some(self.base_r? - self.aligned_r?)
    }
}

/// Predictions of one model keyed by decision point id.
pub type PredictionIndex<'a> = HashMap<&'a str, &'a PredictionRecord>;

pub fn index_predictions(records: &[PredictionRecord]) -> PredictionIndex<'_> {
    records
        .iter()
        .map(|r| (r.decision_point_id.as_str(), r))
        .collect()
}

fn model_side<'a>(
    model: &str,
    preds: &PredictionIndex<'a>,
    dps: &[DecisionPoint],
) -> Result<(Vec<&'a PredictionRecord>, Option<f64>, f64), AnalysisError> {
    let missing: Vec<String> = dps
        .iter()
        .filter(|d| !preds.contains_key(d.id.as_str()))
        .map(|d| d.id.clone())
        .collect();
    if !missing.is_empty() {
        return Err(AnalysisError::Coverage {
            model: model.to_string(),
            missing,
        });
    }
    let recs: Vec<&PredictionRecord> = dps.iter().map(|d| preds[d.id.as_str()]).collect();
    let (mut x, mut y) = (Vec::new(), Vec::new());
    for (rec, dp) in recs.iter().zip(dps) {
        if let Some(p) = rec.p_affirmative {
            x.push(p);
            y.push(dp.human_target());
        }
    }
    let r = pearson(&x, &y).ok().and_then(|c| c.r);
    let mass = recs.iter().map(|r| r.total_mass()).sum::<f64>() / recs.len() as f64;
    Ok((recs, r, mass))
}

/// Correlates each model's predictions with human behavior over `dps`,
/// applies both filters, and assigns the winner.
///
/// Invalid records (no decision mass) are left out of the correlation but
/// count at zero mass.
pub fn compare_pair(
    pair: &PairSpec,
    base_preds: &PredictionIndex<'_>,
    aligned_preds: &PredictionIndex<'_>,
    dps: &[DecisionPoint],
    cfg: &FilterConfig,
) -> Result<FamilyPairResult, AnalysisError> {
    let family = dps.first().ok_or(AnalysisError::Empty)?.family;
    if let Some(d) = dps.iter().find(|d| d.family != family) {
        return Err(AnalysisError::MixedFamilies(family, d.family));
    }
    let (_, base_r, base_mass) = model_side(&pair.base_model_id, base_preds, dps)?;
    let (_, aligned_r, aligned_mass) = model_side(&pair.aligned_model_id, aligned_preds, dps)?;
    let stat = PairStat {
        pair_id: pair.pair_id,
        family,
        base_mass,
        aligned_mass,
        base_r,
        aligned_r,
    };
    let filter = stat.outcome(cfg);
    let winner = if filter.included {
        pair_winner(base_r, aligned_r).map(Winner::from)
    } else {
        None
    };
    Ok(FamilyPairResult {
        pair: pair.clone(),
        family,
        n_decisions: dps.len(),
        base_r,
        aligned_r,
        base_mass,
        aligned_mass,
        filter,
        winner,
    })
}

/// Win counts and tests for one group of pair results.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub group: String,
    pub n_pairs: usize,
    /// Pairs removed by a filter.
    pub n_filtered: usize,
    pub wins_base: u64,
    pub wins_aligned: u64,
    pub ties: u64,
    pub binomial: Option<TestResult>,
    pub wilcoxon: Option<TestResult>,
}

impl AggregateRow {
    fn empty(group: String) -> Self {
        Self {
            group,
            n_pairs: 0,
            n_filtered: 0,
            wins_base: 0,
            wins_aligned: 0,
            ties: 0,
            binomial: None,
            wilcoxon: None,
        }
    }

    pub fn ratio(&self) -> String {
        format!("{}:{}", self.wins_base, self.wins_aligned)
    }
}

/// Builds one row per group. `seed_groups` are emitted (possibly empty)
/// even when no result maps to them; rows follow `seed_groups` order, then
/// the remaining keys in sorted order.
pub fn aggregate<F>(results: &[FamilyPairResult], key: F, seed_groups: &[String]) -> Vec<AggregateRow>
where
    F: Fn(&FamilyPairResult) -> Option<String>,
{
    let mut groups: BTreeMap<String, Vec<&FamilyPairResult>> = BTreeMap::new();
    for g in seed_groups {
        groups.entry(g.clone()).or_default();
    }
    let mut sorted: Vec<&FamilyPairResult> = results.iter().collect();
    sorted.sort_by(|a, b| {
        (a.pair.pair_id, a.family)
            .cmp(&(b.pair.pair_id, b.family))
            .then(a.base_r.partial_cmp(&b.base_r).unwrap_or(std::cmp::Ordering::Equal))
    });
    for r in sorted {
        if let Some(k) = key(r) {
            groups.entry(k).or_default().push(r);
        }
    }
    let mut order: Vec<String> = seed_groups.to_vec();
    order.extend(groups.keys().filter(|k| !seed_groups.contains(k)).cloned());
    order.dedup();
    order
        .into_iter()
        .map(|g| {
            let members = &groups[&g];
            let mut row = AggregateRow::empty(g);
            row.n_pairs = members.len();
            let mut diffs = Vec::new();
            for r in members {
                match r.winner {
                    None => row.n_filtered += 1,
                    Some(Winner::Base) => row.wins_base += 1,
                    Some(Winner::Aligned) => row.wins_aligned += 1,
                    Some(Winner::Tie) => row.ties += 1,
                }
                if matches!(r.winner, Some(Winner::Base | Winner::Aligned)) {
                    if let Some(d) = r.diff() {
                        diffs.push(d);
                    }
                }
            }
            if row.wins_base + row.wins_aligned > 0 {
                row.binomial = Some(sign_test(row.wins_base, row.wins_aligned));
            }
            if diffs.len() >= WILCOXON_MIN_N {
                row.wilcoxon = wilcoxon_signed_rank(&diffs, WilcoxonMethod::Auto).ok();
            }
            row
        })
        .collect()
}

pub fn aggregate_by_family(results: &[FamilyPairResult]) -> Vec<AggregateRow> {
    let seeds: Vec<String> = GameFamily::ALL
        .iter()
        .filter(|f| results.iter().any(|r| r.family == **f))
        .map(|f| f.to_string())
        .collect();
    aggregate(results, |r| Some(r.family.to_string()), &seeds)
}

pub fn aggregate_overall(results: &[FamilyPairResult]) -> AggregateRow {
    aggregate(results, |_| Some("overall".into()), &["overall".into()]).remove(0)
}

pub fn aggregate_text(title: &str, rows: &[AggregateRow]) -> String {
    let mut t = TextTable::new([title, "N", "Filt.", "base:aligned", "ties", "binomial p", "wilcoxon p"]);
    for r in rows {
        let bin = r.binomial.map_or("-".to_string(), |b| {
            let side = match b.direction {
                Direction::First => " (base)",
                Direction::Second => " (aligned)",
                Direction::Tie => "",
            };
            format!("{}{side}", crate::filters::format_p(b.p_value))
        });
        let wil = r
            .wilcoxon
            .map_or("-".to_string(), |w| crate::filters::format_p(w.p_value));
        t.push([
            r.group.clone(),
            (r.wins_base + r.wins_aligned).to_string(),
            r.n_filtered.to_string(),
            r.ratio(),
            r.ties.to_string(),
            bin,
            wil,
        ]);
    }
    t.render()
}

/// How to bucket decision points by round.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RoundSplit {
    /// `round = 1` versus `round >= 2`.
    FirstVsLater,
    /// Early 1–3, mid 4–7, late 8–10.
    Phases,
}

/// Partitions decision points by round index. Every bucket is returned,
/// empty or not.
pub fn round_split(dps: &[DecisionPoint], split: RoundSplit) -> Vec<(String, Vec<DecisionPoint>)> {
    let buckets: Vec<(&str, fn(u32) -> bool)> = match split {
        RoundSplit::FirstVsLater => vec![("round=1", |r| r == 1), ("round>=2", |r| r >= 2)],
        RoundSplit::Phases => vec![
            ("early (1-3)", |r| r <= 3),
            ("mid (4-7)", |r| (4..=7).contains(&r)),
            ("late (8-10)", |r| r >= 8),
        ],
    };
    buckets
        .into_iter()
        .map(|(name, pred)| {
            let subset = dps.iter().filter(|d| pred(d.round_index)).cloned().collect();
            (name.to_string(), subset)
        })
        .collect()
}

/// Partitions decision points by each configuration parameter's value.
/// Returns `(parameter, value, subset)` in parameter order, values sorted.
pub fn param_splits(dps: &[DecisionPoint]) -> Vec<(String, String, Vec<DecisionPoint>)> {
    let mut params: Vec<&'static str> = Vec::new();
    let mut cells: BTreeMap<(&'static str, String), Vec<DecisionPoint>> = BTreeMap::new();
    for dp in dps {
        for (name, value) in dp.config.parameters() {
            if !params.contains(&name) {
                params.push(name);
            }
            cells.entry((name, value)).or_default().push(dp.clone());
        }
    }
    let mut out = Vec::new();
    for p in params {
        for ((name, value), subset) in cells.range((p, String::new())..) {
            if *name != p {
                break;
            }
            out.push((name.to_string(), value.clone(), subset.clone()));
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizeBinRow {
    pub label: String,
    /// Inclusive lower bound in billions of parameters.
    pub lower: f64,
    /// Exclusive upper bound; `None` for the last bin.
    pub upper: Option<f64>,
    pub n: usize,
    pub ci: ConfidenceInterval,
}

fn bin_label(lower: f64, upper: Option<f64>) -> String {
    match upper {
        _ if lower == 0.0 => format!("<{}B", upper.unwrap_or(f64::INFINITY)),
        Some(u) => format!("{lower}-{u}B"),
        None => format!(">={lower}B"),
    }
}

/// Median `base_r - aligned_r` with a percentile bootstrap interval for each
/// size bin. Bins are left-closed, right-open; `boundaries` must be
/// increasing. Empty bins are omitted.
pub fn size_bins(
    results: &[FamilyPairResult],
    boundaries: &[f64],
    resamples: usize,
    seed: u64,
) -> Vec<SizeBinRow> {
    let mut edges = vec![0.0];
    edges.extend_from_slice(boundaries);
    let mut out = Vec::new();
    for (i, &lower) in edges.iter().enumerate() {
        let upper = edges.get(i + 1).copied();
        let mut sorted: Vec<&FamilyPairResult> = results
            .iter()
            .filter(|r| r.filter.included)
            .filter(|r| r.pair.param_count >= lower && upper.is_none_or(|u| r.pair.param_count < u))
            .collect();
        sorted.sort_by_key(|r| (r.pair.pair_id, r.family));
        let diffs: Vec<f64> = sorted.iter().filter_map(|r| r.diff()).collect();
        let label = bin_label(lower, upper);
        match bootstrap_median_ci(&diffs, resamples, 0.95, seed) {
            Ok(ci) => out.push(SizeBinRow {
                label,
                lower,
                upper,
                n: diffs.len(),
                ci,
            }),
            Err(_) => log::info!("size bin {label} has no included pairs; omitted"),
        }
    }
    out
}

pub fn size_bins_text(rows: &[SizeBinRow]) -> String {
    let mut t = TextTable::new(["size", "n", "median diff", "95% CI"]);
    for r in rows {
        t.push([
            r.label.clone(),
            r.n.to_string(),
            format!("{:.3}", r.ci.estimate),
            format!("[{:.3}, {:.3}]", r.ci.lower, r.ci.upper),
        ]);
    }
    t.render()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScatterPoint {
    pub family: GameFamily,
    pub pair_id: u32,
    pub base_r: Option<f64>,
    pub aligned_r: Option<f64>,
    pub included: bool,
    /// Both correlations below the correlation threshold.
    pub shaded: bool,
}

/// One point per pair result, excluded pairs included and flagged.
pub fn scatter_data(results: &[FamilyPairResult], cfg: &FilterConfig) -> Vec<ScatterPoint> {
    let below = |r: Option<f64>| r.is_none_or(|v| v < cfg.min_corr_threshold);
    let mut pts: Vec<ScatterPoint> = results
        .iter()
        .map(|r| ScatterPoint {
            family: r.family,
            pair_id: r.pair.pair_id,
            base_r: r.base_r,
            aligned_r: r.aligned_r,
            included: r.filter.included,
            shaded: below(r.base_r) && below(r.aligned_r),
        })
        .collect();
    pts.sort_by_key(|p| (p.family, p.pair_id));
    pts
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyCell {
    pub base_mass: f64,
    pub base_r: Option<f64>,
    pub aligned_mass: f64,
    pub aligned_r: Option<f64>,
    pub included: bool,
}

/// Per-pair overview: masses and correlations of both models in every family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerPairRow {
    pub pair_id: u32,
    pub base_model_id: String,
    pub aligned_model_id: String,
    pub families: BTreeMap<GameFamily, FamilyCell>,
}

pub fn per_pair_table(results: &[FamilyPairResult]) -> Vec<PerPairRow> {
    let mut rows: BTreeMap<u32, PerPairRow> = BTreeMap::new();
    for r in results {
        let row = rows.entry(r.pair.pair_id).or_insert_with(|| PerPairRow {
            pair_id: r.pair.pair_id,
            base_model_id: r.pair.base_model_id.clone(),
            aligned_model_id: r.pair.aligned_model_id.clone(),
            families: BTreeMap::new(),
        });
        row.families.insert(
            r.family,
            FamilyCell {
                base_mass: r.base_mass,
                base_r: r.base_r,
                aligned_mass: r.aligned_mass,
                aligned_r: r.aligned_r,
                included: r.filter.included,
            },
        );
    }
    rows.into_values().collect()
}

pub fn per_pair_text(rows: &[PerPairRow]) -> String {
    let mut t = TextTable::new(["pair", "model", "family", "mass", "r", "included"]);
    for row in rows {
        for (fam, c) in &row.families {
            for (model, mass, r) in [
                (&row.base_model_id, c.base_mass, c.base_r),
                (&row.aligned_model_id, c.aligned_mass, c.aligned_r),
            ] {
                t.push([
                    row.pair_id.to_string(),
                    model.clone(),
                    fam.to_string(),
                    format!("{mass:.3}"),
                    fmt_r(r),
                    if c.included { "yes" } else { "no" }.to_string(),
                ]);
            }
        }
    }
    t.render()
}

/// Equilibrium probability of each decision point's affirmative label,
/// keyed by id. Degenerate games are skipped with a warning.
pub fn ne_targets(dps: &[DecisionPoint]) -> BTreeMap<String, f64> {
    let mut out = BTreeMap::new();
    for dp in dps {
        let FamilyConfig::MatrixOneshot(game) = &dp.config else {
            continue;
        };
        match mixed_ne_2x2(game) {
            Ok(ne) => {
                let first = dp.decision_labels.first() == Some(&dp.affirmative_label);
                let p = if first { ne.row_action1_prob } else { 1.0 - ne.row_action1_prob };
                out.insert(dp.id.clone(), p);
            }
            Err(e) => log::warn!("{}: no equilibrium prediction ({e})", dp.id),
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NePairRow {
    pub pair_id: u32,
    pub base_r: Option<f64>,
    pub aligned_r: Option<f64>,
    pub closer: Option<Winner>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeSummary {
    pub n_games: usize,
    /// Human aggregate choice rates against equilibrium probabilities.
    pub human_r: Option<f64>,
    pub pairs: Vec<NePairRow>,
    pub closer_base: u64,
    pub closer_aligned: u64,
    pub ties: u64,
    pub binomial: Option<TestResult>,
    pub mean_base_r: Option<f64>,
    pub mean_aligned_r: Option<f64>,
}

fn correlate_with(preds: &PredictionIndex<'_>, targets: &BTreeMap<String, f64>) -> Option<f64> {
    let (mut x, mut y) = (Vec::new(), Vec::new());
    for (id, t) in targets {
        if let Some(p) = preds.get(id.as_str()).and_then(|r| r.p_affirmative) {
            x.push(p);
            y.push(*t);
        }
    }
    ne_alignment(&x, &y).ok().and_then(|c| c.r)
}

fn mean(v: impl Iterator<Item = f64>) -> Option<f64> {
    let v: Vec<f64> = v.collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

/// Equilibrium alignment of both models in every pair that passes the
/// main filters on the one-shot family.
pub fn ne_summary(
    dps: &[DecisionPoint],
    oneshot_results: &[FamilyPairResult],
    predictions: &HashMap<String, PredictionIndex<'_>>,
) -> NeSummary {
    let targets = ne_targets(dps);
    let (hx, hy): (Vec<f64>, Vec<f64>) = dps
        .iter()
        .filter_map(|d| Some((d.aggregate_choice_rate?, *targets.get(&d.id)?)))
        .unzip();
    let human_r = pearson(&hx, &hy).ok().and_then(|c| c.r);
    let empty = PredictionIndex::new();
    let mut included: Vec<&FamilyPairResult> = oneshot_results
        .iter()
        .filter(|r| r.family == GameFamily::MatrixOneshot && r.filter.included)
        .collect();
    included.sort_by_key(|r| r.pair.pair_id);
    let pairs: Vec<NePairRow> = included
        .iter()
        .map(|r| {
            let b = correlate_with(predictions.get(&r.pair.base_model_id).unwrap_or(&empty), &targets);
            let a = correlate_with(predictions.get(&r.pair.aligned_model_id).unwrap_or(&empty), &targets);
            NePairRow {
                pair_id: r.pair.pair_id,
                base_r: b,
                aligned_r: a,
                closer: crate::equilibrium::closer_to_ne(b, a).ok(),
            }
        })
        .collect();
    let count = |w: Winner| pairs.iter().filter(|p| p.closer == Some(w)).count() as u64;
    let (cb, ca, ties) = (count(Winner::Base), count(Winner::Aligned), count(Winner::Tie));
    NeSummary {
        n_games: targets.len(),
        human_r,
        closer_base: cb,
        closer_aligned: ca,
        ties,
        binomial: (cb + ca > 0).then(|| sign_test(cb, ca)),
        mean_base_r: mean(pairs.iter().filter_map(|p| p.base_r)),
        mean_aligned_r: mean(pairs.iter().filter_map(|p| p.aligned_r)),
        pairs,
    }
}

pub fn ne_summary_text(s: &NeSummary) -> String {
    let mut t = TextTable::new(["quantity", "value"]);
    t.push(["games with an equilibrium".to_string(), s.n_games.to_string()]);
    t.push(["human vs equilibrium r".to_string(), fmt_r(s.human_r)]);
    t.push(["mean base r".to_string(), fmt_r(s.mean_base_r)]);
    t.push(["mean aligned r".to_string(), fmt_r(s.mean_aligned_r)]);
    t.push([
        "closer (base:aligned)".to_string(),
        format!("{}:{}", s.closer_base, s.closer_aligned),
    ]);
    t.push([
        "binomial p".to_string(),
        s.binomial.map_or("-".into(), |b| crate::filters::format_p(b.p_value)),
    ]);
    t.render()
}
