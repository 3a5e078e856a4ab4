use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::game_model::{DecisionPoint, GameFamily};
use crate::logprob::{match_decision_tokens, AliasTable, DistributionCache, LogprobProvider};
use crate::predictor::{assemble_record, write_records, PredictionRecord};
use crate::prompt::{variant_by_name, PromptBuilder, PromptFormat, RenderedPrompt, VariantName};

use super::{make_backend, model_slug, Inputs, PipelineError, RunConfig};

/// Restricts a prediction run. Empty lists mean "everything configured".
#[derive(Debug, Clone, Default)]
pub struct PredictScope {
    pub families: Vec<GameFamily>,
    pub models: Vec<String>,
    pub variants: Vec<VariantName>,
    /// Renders every selected model in this format instead of the
    /// configured crossing.
    pub format: Option<PromptFormat>,
}

#[derive(Debug, Clone, Default)]
pub struct PredictSummary {
    pub records: usize,
    pub files: Vec<PathBuf>,
    /// Requests that reached the backend; zero when everything was cached.
    pub backend_calls: usize,
    pub failures: Vec<String>,
}

/// `<output>/predictions/<family>/<variant>/<format>/<model>.jsonl`
pub fn prediction_path(
    output_dir: &Path,
    family: GameFamily,
    variant: VariantName,
    format: PromptFormat,
    model: &str,
) -> PathBuf {
    output_dir
        .join("predictions")
        .join(family.as_str())
        .join(variant.as_str())
        .join(format.as_str())
        .join(format!("{}.jsonl", model_slug(model)))
}

struct Job {
    family: GameFamily,
    variant: VariantName,
    format: PromptFormat,
    model: String,
}

struct Task<'a> {
    job: usize,
    model: &'a str,
    prompt: RenderedPrompt,
}

fn run_task(
    provider: &LogprobProvider<Box<dyn crate::logprob::LogprobBackend>>,
    task: &Task<'_>,
    k: usize,
) -> Result<PredictionRecord, String> {
    let p = &task.prompt;
    let describe = |e: &dyn std::fmt::Display| format!("{} / {}: {e}", task.model, p.decision_point_id);
    let dist = provider
        .fetch_next_token_logprobs(task.model, p, k)
        .map_err(|e| describe(&e))?;
    let aliases = AliasTable::default_for(&p.expected_labels);
    let masses = match_decision_tokens(&dist, &p.expected_labels, &aliases).map_err(|e| describe(&e))?;
    assemble_record(p, task.model, &dist, masses, k).map_err(|e| describe(&e))
}

/// Fetches next-token distributions for every selected (family, variant,
/// model) and writes one record file per combination.
pub fn predict(cfg: &RunConfig, scope: &PredictScope) -> Result<PredictSummary, PipelineError> {
    let inputs = Inputs::load(cfg)?;
    let builder = PromptBuilder::new().allow_all_variants(cfg.prompts.allow_all_variants);
    let variants: Vec<VariantName> = if scope.variants.is_empty() {
        cfg.prompts.variants.clone()
    } else {
        scope.variants.clone()
    };
    for m in &scope.models {
        let known = inputs
            .registry
            .pairs
            .iter()
            .any(|p| &p.base_model_id == m || &p.aligned_model_id == m);
        if !known {
            return Err(PipelineError::Config(format!("model `{m}` is not in the registry")));
        }
    }
    let mut model_formats: Vec<(String, PromptFormat)> = cfg
        .model_formats(&inputs.registry.pairs)
        .into_iter()
        .filter(|(m, _)| scope.models.is_empty() || scope.models.contains(m))
        .map(|(m, f)| (m, scope.format.unwrap_or(f)))
        .collect();
    let mut seen = BTreeSet::new();
    model_formats.retain(|mf| seen.insert(mf.clone()));

    let mut jobs = Vec::new();
    for &family in inputs.datasets.keys() {
        if !scope.families.is_empty() && !scope.families.contains(&family) {
            continue;
        }
        for &variant in &variants {
            if !builder.supports(family, variant) {
                log::info!("skipping variant {variant} for {family}");
                continue;
            }
            for (model, format) in &model_formats {
                jobs.push(Job {
                    family,
                    variant,
                    format: *format,
                    model: model.clone(),
                });
            }
        }
    }

    let mut tasks = Vec::new();
    for (j, job) in jobs.iter().enumerate() {
        let template = match job.format {
            PromptFormat::Chat => Some(inputs.template_for(&job.model).ok_or_else(|| {
                PipelineError::Validation(vec![format!("templates: no chat template for model `{}`", job.model)])
            })?),
            PromptFormat::Standard => None,
        };
        let variant = variant_by_name(job.variant);
        let dps: &[DecisionPoint] = &inputs.datasets[&job.family];
        for dp in dps {
            let prompt = builder
                .build_prompt(dp, &variant, job.format, template)
                .map_err(|e| PipelineError::Config(e.to_string()))?;
            tasks.push(Task {
                job: j,
                model: &job.model,
                prompt,
            });
        }
    }

    let cache = DistributionCache::new(cfg.cache_dir())?;
    let provider = LogprobProvider::new(make_backend(cfg)?).with_disk_cache(cache);
    let models: BTreeSet<&str> = jobs.iter().map(|j| j.model.as_str()).collect();
    for m in &models {
        provider.probe(m)?;
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.concurrency)
        .build()
        .map_err(|e| PipelineError::Config(e.to_string()))?;
    let k = cfg.top_k;
    log::info!("{} prediction(s) across {} file(s)", tasks.len(), jobs.len());
    let results: Vec<Result<PredictionRecord, String>> =
        pool.install(|| tasks.par_iter().map(|t| run_task(&provider, t, k)).collect());

    let mut per_job: Vec<Vec<PredictionRecord>> = jobs.iter().map(|_| Vec::new()).collect();
    let mut summary = PredictSummary::default();
    for (task, res) in tasks.iter().zip(results) {
        match res {
            Ok(rec) => per_job[task.job].push(rec),
            Err(e) => summary.failures.push(e),
        }
    }
    let out = cfg.output_dir();
    for (job, records) in jobs.iter().zip(per_job) {
        let path = prediction_path(&out, job.family, job.variant, job.format, &job.model);
        write_records(&path, &records).map_err(|e| PipelineError::Io(e.to_string()))?;
        log::info!("{}: {} record(s)", path.display(), records.len());
        summary.records += records.len();
        summary.files.push(path);
    }
    summary.backend_calls = provider.backend_calls();
    Ok(summary)
}
