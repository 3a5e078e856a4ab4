//! End-to-end orchestration: validation, prediction, evaluation, reports.

mod config;
mod evaluate;
mod predict;
mod synth;

pub use config::{AnalysisConfig, BackendConfig, Crossing, PromptSelection, RunConfig};
pub use evaluate::{evaluate, load_report, write_report, ParamTable, ReportBundle, RoundTable, VariantRow};
pub use predict::{predict, prediction_path, PredictScope, PredictSummary};
pub use synth::{synth, synth_family, SynthOptions, SYNTH_FEATURE};

use std::collections::BTreeMap;
use std::path::Path;

use crate::game_model::{load_dataset, load_registry, DecisionPoint, GameFamily, PairRegistry, PairSpec};
use crate::logprob::{HttpBackend, LogprobBackend, MockBackend, ProviderError};
use crate::prompt::{ChatTemplateSpec, PromptFormat, TemplateSet};

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("config: {0}")]
    Config(String),
    #[error("validation failed with {} error(s):\n  {}", .0.len(), .0.join("\n  "))]
    Validation(Vec<String>),
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error("{failed} of {total} prediction(s) failed")]
    FetchFailures { failed: usize, total: usize },
    #[error("missing data:\n  {}", .0.join("\n  "))]
    MissingData(Vec<String>),
    #[error("{0}")]
    Io(String),
}

impl PipelineError {
    /// Process exit status: 1 validation, 2 transport, 3 missing data.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_) | PipelineError::Validation(_) | PipelineError::Io(_) => 1,
            PipelineError::Provider(ProviderError::Config(_)) => 1,
            PipelineError::Provider(_) | PipelineError::FetchFailures { .. } => 2,
            PipelineError::MissingData(_) => 3,
        }
    }
}

pub(crate) fn io_err(path: &Path) -> impl Fn(std::io::Error) -> PipelineError + '_ {
    move |e| PipelineError::Io(format!("{}: {e}", path.display()))
}

/// Registry, templates and datasets referenced by a config.
pub struct Inputs {
    pub registry: PairRegistry,
    pub templates: TemplateSet,
    pub datasets: BTreeMap<GameFamily, Vec<DecisionPoint>>,
}

impl Inputs {
    pub fn load(cfg: &RunConfig) -> Result<Self, PipelineError> {
        let errs = validate(cfg);
        if !errs.is_empty() {
            return Err(PipelineError::Validation(errs));
        }
        let registry = load_registry(&cfg.registry_path())
            .map_err(|e| PipelineError::Config(e.to_string()))?;
        let templates = match cfg.template_dir() {
            Some(dir) => TemplateSet::load_dir(&dir).map_err(|e| PipelineError::Config(e.to_string()))?,
            None => TemplateSet::default(),
        };
        let mut datasets = BTreeMap::new();
        for &family in cfg.datasets.keys() {
            let path = cfg.dataset_path(family).expect("configured family");
            let dps = load_dataset(&path, family).map_err(|e| PipelineError::Config(e.to_string()))?;
            datasets.insert(family, dps);
        }
        Ok(Self {
            registry,
            templates,
            datasets,
        })
    }

    pub fn template_for(&self, model: &str) -> Option<&ChatTemplateSpec> {
        template_for(&self.templates, &self.registry.pairs, model)
    }
}

/// A model's own chat template, or for a base model without one, the
/// template of its aligned partner.
pub fn template_for<'a>(
    templates: &'a TemplateSet,
    pairs: &[PairSpec],
    model: &str,
) -> Option<&'a ChatTemplateSpec> {
    templates.get(model).or_else(|| {
        pairs
            .iter()
            .filter(|p| p.base_model_id == model)
            .find_map(|p| templates.get(&p.aligned_model_id))
    })
}

/// File-system safe form of a model id.
pub fn model_slug(model: &str) -> String {
    model
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || matches!(c, '.' | '-' | '_') { c } else { '_' })
        .collect()
}

/// Checks schemas, registry consistency and template availability. Returns
/// every problem found; an empty list means the config is usable.
pub fn validate(cfg: &RunConfig) -> Vec<String> {
    let mut errs = cfg.check();

    let registry = match load_registry(&cfg.registry_path()) {
        Ok(r) => {
            errs.extend(r.violations().iter().map(|e| format!("registry: {e}")));
            if r.pairs.is_empty() {
                errs.push("registry: no pairs".to_string());
            }
            Some(r)
        }
        Err(e) => {
            errs.push(format!("registry: {e}"));
            None
        }
    };

    let templates = match cfg.template_dir() {
        Some(dir) => match TemplateSet::load_dir(&dir) {
            Ok(t) => Some(t),
            Err(e) => {
                errs.push(format!("templates: {e}"));
                None
            }
        },
        None => Some(TemplateSet::default()),
    };

    if let (Some(reg), Some(templates)) = (&registry, &templates) {
        for (model, format) in cfg.model_formats(&reg.pairs) {
            if format == PromptFormat::Chat && template_for(templates, &reg.pairs, &model).is_none() {
                errs.push(format!("templates: no chat template for model `{model}`"));
            }
        }
    }

    if let Some(reg) = &registry {
        match &cfg.backend {
            BackendConfig::Mock { models } => {
                let mut seen = std::collections::BTreeSet::new();
                for (model, _) in cfg.model_formats(&reg.pairs) {
                    if !models.contains_key(&model) && seen.insert(model.clone()) {
                        errs.push(format!("backend: no mock behavior for model `{model}`"));
                    }
                }
            }
            BackendConfig::Http { http } => {
                if let Some(var) = &http.api_key_env {
                    if std::env::var_os(var).is_none() {
                        errs.push(format!("backend: credential variable `{var}` is not set"));
                    }
                }
            }
        }
    }

    for &family in cfg.datasets.keys() {
        let path = cfg.dataset_path(family).expect("configured family");
        if let Err(e) = load_dataset(&path, family) {
            errs.push(format!("dataset {family} ({}): {e}", path.display()));
        }
    }
    errs
}

/// Builds the configured backend.
pub fn make_backend(cfg: &RunConfig) -> Result<Box<dyn LogprobBackend>, PipelineError> {
    Ok(match &cfg.backend {
        BackendConfig::Mock { models } => {
            let mut m = MockBackend::with_builtins();
            for (id, b) in models {
                m.insert(id.clone(), b.clone())?;
            }
            Box::new(m)
        }
        BackendConfig::Http { http } => Box::new(HttpBackend::new(http.clone())?),
    })
}
