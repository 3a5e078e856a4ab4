use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{
    aggregate, aggregate_by_family, aggregate_overall, aggregate_text, compare_pair, index_predictions,
    ne_summary, ne_summary_text, param_splits, per_pair_table, per_pair_text, round_split, scatter_data,
    size_bins, size_bins_text, AggregateRow, AnalysisError, FamilyPairResult, NeSummary, PerPairRow,
    PredictionIndex, RoundSplit, ScatterPoint, SizeBinRow,
};
use crate::filters::{sensitivity_grid, FilterConfig, SensitivityGrid, DEFAULT_CORR_LEVELS, DEFAULT_MASS_LEVELS};
use crate::game_model::{DecisionPoint, GameFamily, PairSpec};
use crate::predictor::{read_records, PredictionRecord};
use crate::prompt::{PromptBuilder, PromptFormat, VariantName};

use super::{io_err, prediction_path, Crossing, Inputs, PipelineError, RunConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantRow {
    pub variant: VariantName,
    /// A family name, or `pooled` for bargaining and negotiation together.
    pub scope: String,
    pub row: AggregateRow,
}

/// Win counts per value of one configuration parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamTable {
    pub family: GameFamily,
    pub parameter: String,
    pub rows: Vec<AggregateRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundTable {
    pub family: GameFamily,
    pub split: RoundSplit,
    pub rows: Vec<AggregateRow>,
}

/// Everything `evaluate` computes. Serialized as `report.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportBundle {
    pub config_hash: String,
    pub seed: u64,
    pub headline_variant: VariantName,
    pub crossing: Crossing,
    pub filters: FilterConfig,
    pub pair_results: Vec<FamilyPairResult>,
    pub families: Vec<AggregateRow>,
    /// Bargaining, persuasion, negotiation and repeated matrix games.
    pub overall_multi_round: AggregateRow,
    pub overall_all: AggregateRow,
    pub variants: Vec<VariantRow>,
    pub params: Vec<ParamTable>,
    pub rounds: Vec<RoundTable>,
    pub size_bins: Vec<SizeBinRow>,
    pub sensitivity: Vec<SensitivityGrid>,
    pub ne: Option<NeSummary>,
    pub scatter: Vec<ScatterPoint>,
    pub per_pair: Vec<PerPairRow>,
}

type StoreKey = (GameFamily, VariantName, PromptFormat, String);

/// All prediction records needed for the configured comparisons.
struct Store {
    records: BTreeMap<StoreKey, Vec<PredictionRecord>>,
}

impl Store {
    fn load(cfg: &RunConfig, inputs: &Inputs, families: &[GameFamily], variants: &[(GameFamily, VariantName)]) -> Result<Self, PipelineError> {
        let (bf, af) = cfg.formats();
        let out = cfg.output_dir();
        let mut records = BTreeMap::new();
        let mut gaps = Vec::new();
        for &(family, variant) in variants {
            if !families.contains(&family) {
                continue;
            }
            for p in &inputs.registry.pairs {
                for (model, format) in [(&p.base_model_id, bf), (&p.aligned_model_id, af)] {
                    let key = (family, variant, format, model.clone());
                    if records.contains_key(&key) {
                        continue;
                    }
                    let path = prediction_path(&out, family, variant, format, model);
                    if !path.exists() {
                        gaps.push(format!("{family}/{variant}/{format}: no predictions for `{model}` ({})", path.display()));
                        continue;
                    }
                    let recs = read_records(&path).map_err(|e| PipelineError::Io(e.to_string()))?;
                    records.insert(key, recs);
                }
            }
        }
        if !gaps.is_empty() {
            return Err(PipelineError::MissingData(gaps));
        }
        Ok(Self { records })
    }

    fn indices(&self) -> BTreeMap<&StoreKey, PredictionIndex<'_>> {
        self.records.iter().map(|(k, v)| (k, index_predictions(v))).collect()
    }
}

struct Ctx<'a> {
    pairs: &'a [PairSpec],
    indices: BTreeMap<&'a StoreKey, PredictionIndex<'a>>,
    formats: (PromptFormat, PromptFormat),
    filters: FilterConfig,
}

impl Ctx<'_> {
    fn index(&self, family: GameFamily, variant: VariantName, format: PromptFormat, model: &str) -> &PredictionIndex<'_> {
        &self.indices[&(family, variant, format, model.to_string())]
    }

    /// Compares every pair on `dps` (one family) under `variant`.
    fn compare_all(&self, dps: &[DecisionPoint], variant: VariantName) -> Result<Vec<FamilyPairResult>, PipelineError> {
        let Some(first) = dps.first() else {
            return Ok(Vec::new());
        };
        let family = first.family;
        let (bf, af) = self.formats;
        self.pairs
            .par_iter()
            .map(|p| {
                let b = self.index(family, variant, bf, &p.base_model_id);
                let a = self.index(family, variant, af, &p.aligned_model_id);
                compare_pair(p, b, a, dps, &self.filters)
            })
            .collect::<Result<Vec<_>, AnalysisError>>()
            .map_err(|e| PipelineError::MissingData(vec![format!("{family}/{variant}: {e}")]))
    }
}

fn single_row(results: &[FamilyPairResult], group: &str) -> AggregateRow {
    aggregate(results, |_| Some(group.to_string()), &[group.to_string()]).remove(0)
}

/// Runs every comparison and aggregation over persisted predictions.
/// `families` restricts the run; empty means every configured family.
pub fn evaluate(cfg: &RunConfig, families: &[GameFamily]) -> Result<ReportBundle, PipelineError> {
    let inputs = Inputs::load(cfg)?;
    let families: Vec<GameFamily> = inputs
        .datasets
        .keys()
        .copied()
        .filter(|f| families.is_empty() || families.contains(f))
        .collect();
    let builder = PromptBuilder::new().allow_all_variants(cfg.prompts.allow_all_variants);
    let headline = cfg.headline_variant();
    let mut variants: Vec<(GameFamily, VariantName)> = Vec::new();
    for &f in &families {
        for &v in &cfg.prompts.variants {
            if builder.supports(f, v) && !variants.contains(&(f, v)) {
                variants.push((f, v));
            }
        }
    }
    let store = Store::load(cfg, &inputs, &families, &variants)?;
    let ctx = Ctx {
        pairs: &inputs.registry.pairs,
        indices: store.indices(),
        formats: cfg.formats(),
        filters: cfg.filters,
    };

    let mut pair_results = Vec::new();
    for &f in &families {
        if builder.supports(f, headline) {
            pair_results.extend(ctx.compare_all(&inputs.datasets[&f], headline)?);
        }
    }
    let families_rows = aggregate_by_family(&pair_results);
    let multi: Vec<FamilyPairResult> = pair_results
        .iter()
        .filter(|r| GameFamily::MULTI_ROUND.contains(&r.family))
        .cloned()
        .collect();
    let overall_multi_round = single_row(&multi, "overall (multi-round)");
    let mut overall_all = aggregate_overall(&pair_results);
    overall_all.group = "overall (all families)".to_string();

    let mut variant_rows = Vec::new();
    for &v in &cfg.prompts.variants {
        let mut pooled = Vec::new();
        let mut per_family = Vec::new();
        for &f in &families {
            if !variants.contains(&(f, v)) {
                continue;
            }
            let res = if v == headline {
                pair_results.iter().filter(|r| r.family == f).cloned().collect()
            } else {
                ctx.compare_all(&inputs.datasets[&f], v)?
            };
            if matches!(f, GameFamily::Bargaining | GameFamily::Negotiation) {
                pooled.extend(res.iter().cloned());
            }
            per_family.push(VariantRow {
                variant: v,
                scope: f.to_string(),
                row: single_row(&res, v.as_str()),
            });
        }
        variant_rows.push(VariantRow {
            variant: v,
            scope: "pooled".to_string(),
            row: single_row(&pooled, v.as_str()),
        });
        variant_rows.extend(per_family);
    }

    let mut params = Vec::new();
    let mut rounds = Vec::new();
    for &f in &families {
        if !builder.supports(f, headline) {
            continue;
        }
        let dps = &inputs.datasets[&f];
        let mut by_param: Vec<ParamTable> = Vec::new();
        for (param, value, subset) in param_splits(dps) {
            let res = ctx.compare_all(&subset, headline)?;
            let row = single_row(&res, &value);
            match by_param.iter_mut().find(|t| t.parameter == param) {
                Some(t) => t.rows.push(row),
                None => by_param.push(ParamTable {
                    family: f,
                    parameter: param,
                    rows: vec![row],
                }),
            }
        }
        params.extend(by_param);

        if !f.is_aggregate() {
            let split = if f == GameFamily::MatrixRepeated {
                RoundSplit::Phases
            } else {
                RoundSplit::FirstVsLater
            };
            let mut rows = Vec::new();
            for (name, subset) in round_split(dps, split) {
                let res = ctx.compare_all(&subset, headline)?;
                rows.push(single_row(&res, &name));
            }
            rounds.push(RoundTable { family: f, split, rows });
        }
    }

    let size = size_bins(&multi, &cfg.analysis.size_bins, cfg.analysis.bootstrap_resamples, cfg.seed);

    let stats: Vec<_> = pair_results.iter().map(FamilyPairResult::stat).collect();
    let sensitivity: Vec<SensitivityGrid> = families
        .iter()
        .filter(|f| pair_results.iter().any(|r| r.family == **f))
        .map(|&f| sensitivity_grid(&stats, f, &DEFAULT_MASS_LEVELS, &DEFAULT_CORR_LEVELS))
        .collect();

    let ne = if families.contains(&GameFamily::MatrixOneshot) && builder.supports(GameFamily::MatrixOneshot, headline) {
        let (bf, af) = ctx.formats;
        let mut preds: HashMap<String, PredictionIndex<'_>> = HashMap::new();
        for p in ctx.pairs {
            for (m, fmt) in [(&p.base_model_id, bf), (&p.aligned_model_id, af)] {
                preds
                    .entry(m.clone())
                    .or_insert_with(|| ctx.index(GameFamily::MatrixOneshot, headline, fmt, m).clone());
            }
        }
        let oneshot: Vec<FamilyPairResult> = pair_results
            .iter()
            .filter(|r| r.family == GameFamily::MatrixOneshot)
            .cloned()
            .collect();
        Some(ne_summary(&inputs.datasets[&GameFamily::MatrixOneshot], &oneshot, &preds))
    } else {
        None
    };

    Ok(ReportBundle {
        config_hash: cfg.config_hash().to_string(),
        seed: cfg.seed,
        headline_variant: headline,
        crossing: cfg.prompts.crossing,
        filters: cfg.filters,
        scatter: scatter_data(&pair_results, &cfg.filters),
        per_pair: per_pair_table(&pair_results),
        families: families_rows,
        overall_multi_round,
        overall_all,
        variants: variant_rows,
        params,
        rounds,
        size_bins: size,
        sensitivity,
        ne,
        pair_results,
    })
}

impl ReportBundle {
    fn header(&self) -> String {
        format!("# config {} seed {}\n\n", self.config_hash, self.seed)
    }

    pub fn families_text(&self) -> String {
        let mut rows = self.families.clone();
        rows.push(self.overall_multi_round.clone());
        rows.push(self.overall_all.clone());
        self.header() + &aggregate_text("family", &rows)
    }

    pub fn variants_text(&self) -> String {
        let mut out = self.header();
        let mut scopes: Vec<&str> = Vec::new();
        for r in &self.variants {
            if !scopes.contains(&r.scope.as_str()) {
                scopes.push(&r.scope);
            }
        }
        for scope in scopes {
            let rows: Vec<AggregateRow> = self
                .variants
                .iter()
                .filter(|r| r.scope == scope)
                .map(|r| r.row.clone())
                .collect();
            let title = if scope == "pooled" {
                "variant (bargaining + negotiation)".to_string()
            } else {
                format!("variant ({scope})")
            };
            out.push_str(&aggregate_text(&title, &rows));
            out.push('\n');
        }
        out
    }

    pub fn params_text(&self) -> String {
        let mut out = self.header();
        for t in &self.params {
            out.push_str(&aggregate_text(&format!("{} {}", t.family, t.parameter), &t.rows));
            out.push('\n');
        }
        out
    }

    pub fn rounds_text(&self) -> String {
        let mut out = self.header();
        for t in &self.rounds {
            out.push_str(&aggregate_text(&format!("{} rounds", t.family), &t.rows));
            out.push('\n');
        }
        out
    }

    pub fn sensitivity_text(&self) -> String {
        let mut out = self.header();
        for g in &self.sensitivity {
            out.push_str(&g.to_text());
            out.push('\n');
        }
        out
    }

    pub fn ne_text(&self) -> String {
        match &self.ne {
            Some(ne) => self.header() + &ne_summary_text(ne),
            None => self.header() + "no one-shot matrix games in this run\n",
        }
    }

    pub fn size_bins_text(&self) -> String {
        self.header() + &size_bins_text(&self.size_bins)
    }

    pub fn per_pair_text(&self) -> String {
        self.header() + &per_pair_text(&self.per_pair)
    }

    /// Full-precision correlations; undefined ones are left empty.
    pub fn scatter_csv(&self) -> String {
        let mut out = self.header();
        out.push_str("family,pair_id,base_r,aligned_r,included,shaded\n");
        for p in &self.scatter {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                p.family,
                p.pair_id,
                csv_r(p.base_r),
                csv_r(p.aligned_r),
                p.included,
                p.shaded
            );
        }
        out
    }

    /// File name and content of every plain-text table.
    pub fn text_files(&self) -> Vec<(&'static str, String)> {
        vec![
            ("families.txt", self.families_text()),
            ("per_pair.txt", self.per_pair_text()),
            ("variants.txt", self.variants_text()),
            ("params.txt", self.params_text()),
            ("rounds.txt", self.rounds_text()),
            ("size_bins.txt", self.size_bins_text()),
            ("sensitivity.txt", self.sensitivity_text()),
            ("ne.txt", self.ne_text()),
            ("scatter.csv", self.scatter_csv()),
        ]
    }
}

fn csv_r(r: Option<f64>) -> String {
    r.map_or_else(String::new, |v| v.to_string())
}

/// Writes `report.json` and the text tables into `<dir>`.
pub fn write_report(bundle: &ReportBundle, dir: &Path) -> Result<(), PipelineError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let json = serde_json::to_string_pretty(bundle).expect("report serializes") + "\n";
    let path = dir.join("report.json");
    fs::write(&path, json).map_err(io_err(&path))?;
    for (name, text) in bundle.text_files() {
        let path = dir.join(name);
        fs::write(&path, text).map_err(io_err(&path))?;
    }
    Ok(())
}

pub fn load_report(dir: &Path) -> Result<ReportBundle, PipelineError> {
    let path = dir.join("report.json");
    if !path.exists() {
        return Err(PipelineError::MissingData(vec![format!(
            "{} not found; run `evaluate` first",
            path.display()
        )]));
    }
    let text = fs::read_to_string(&path).map_err(io_err(&path))?;
    serde_json::from_str(&text).map_err(|e| PipelineError::Io(format!("{}: {e}", path.display())))
}
