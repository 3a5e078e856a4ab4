use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::filters::FilterConfig;
use crate::game_model::{GameFamily, PairSpec};
use crate::logprob::{HttpConfig, MockBehavior, DEFAULT_TOP_K};
use crate::prompt::{PromptFormat, VariantName};

use super::PipelineError;

/// Which prompt format each side of a pair receives.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Crossing {
    /// Base models get plain text, aligned models their chat template.
    #[default]
    Native,
    BothPlain,
    BothChat,
}

impl Crossing {
    /// (base format, aligned format)
    pub fn formats(self) -> (PromptFormat, PromptFormat) {
        match self {
            Crossing::Native => (PromptFormat::Standard, PromptFormat::Chat),
            Crossing::BothPlain => (PromptFormat::Standard, PromptFormat::Standard),
            Crossing::BothChat => (PromptFormat::Chat, PromptFormat::Chat),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BackendConfig {
    Mock {
        #[serde(default)]
        models: BTreeMap<String, MockBehavior>,
    },
    Http {
        #[serde(flatten)]
        http: HttpConfig,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PromptSelection {
    /// The first variant is the headline one.
    pub variants: Vec<VariantName>,
    pub crossing: Crossing,
    /// Build every variant for every family instead of the default
    /// compatibility table.
    pub allow_all_variants: bool,
}

impl Default for PromptSelection {
    fn default() -> Self {
        Self {
            variants: vec![VariantName::Standard],
            crossing: Crossing::Native,
            allow_all_variants: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisConfig {
    /// Size-bin boundaries in billions of parameters.
    pub size_bins: Vec<f64>,
    pub bootstrap_resamples: usize,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            size_bins: vec![3.0, 14.0],
            bootstrap_resamples: 5000,
        }
    }
}

fn one() -> usize {
    1
}

fn default_top_k() -> usize {
    DEFAULT_TOP_K
}

/// Everything a run needs. Relative paths are resolved against the
/// directory holding the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub output_dir: PathBuf,
    pub registry: PathBuf,
    #[serde(default)]
    pub template_dir: Option<PathBuf>,
    /// Defaults to `<output_dir>/cache`.
    #[serde(default)]
    pub cache_dir: Option<PathBuf>,
    pub datasets: BTreeMap<GameFamily, PathBuf>,
    pub backend: BackendConfig,
    #[serde(default = "one")]
    pub concurrency: usize,
    #[serde(default = "default_top_k")]
    pub top_k: usize,
    #[serde(default)]
    pub filters: FilterConfig,
    #[serde(default)]
    pub prompts: PromptSelection,
    #[serde(default)]
    pub analysis: AnalysisConfig,
    #[serde(skip)]
    base_dir: PathBuf,
    #[serde(skip)]
    hash: String,
}

impl RunConfig {
    pub fn from_toml_str(text: &str, base_dir: &Path) -> Result<Self, PipelineError> {
        let mut cfg: RunConfig =
            toml::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))?;
        // Hash the config as written, so the location of the run does not matter.
        let canonical = serde_json::to_vec(&cfg).expect("config serializes");
        cfg.hash = hex::encode(Sha256::digest(&canonical))[..16].to_string();
        cfg.base_dir = base_dir.to_path_buf();
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = fs::read_to_string(path)
            .map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_toml_str(&text, base)
    }

    /// Short hex digest of the configuration as written.
    pub fn config_hash(&self) -> &str {
        &self.hash
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn output_dir(&self) -> PathBuf {
        self.resolve(&self.output_dir)
    }

    pub fn cache_dir(&self) -> PathBuf {
        match &self.cache_dir {
            Some(p) => self.resolve(p),
            None => self.output_dir().join("cache"),
        }
    }

    pub fn registry_path(&self) -> PathBuf {
        self.resolve(&self.registry)
    }

    pub fn template_dir(&self) -> Option<PathBuf> {
        self.template_dir.as_deref().map(|p| self.resolve(p))
    }

    pub fn dataset_path(&self, family: GameFamily) -> Option<PathBuf> {
        self.datasets.get(&family).map(|p| self.resolve(p))
    }

    pub fn headline_variant(&self) -> VariantName {
        self.prompts
            .variants
            .first()
            .copied()
            .unwrap_or(VariantName::Standard)
    }

    /// Format used for each side of `pair` under the configured crossing.
    pub fn formats(&self) -> (PromptFormat, PromptFormat) {
        self.prompts.crossing.formats()
    }

    /// Models and their formats, in registry order, each model once.
    pub fn model_formats(&self, pairs: &[PairSpec]) -> Vec<(String, PromptFormat)> {
        let (bf, af) = self.formats();
        let mut out: Vec<(String, PromptFormat)> = Vec::new();
        for p in pairs {
            for (m, f) in [(&p.base_model_id, bf), (&p.aligned_model_id, af)] {
                if !out.iter().any(|(x, y)| x == m && *y == f) {
                    out.push((m.clone(), f));
                }
            }
        }
        out
    }

    /// Static checks that need no file access.
    pub fn check(&self) -> Vec<String> {
        let mut errs = Vec::new();
        if self.concurrency < 1 {
            errs.push("concurrency must be at least 1".to_string());
        }
        if self.top_k < 1 {
            errs.push("top_k must be at least 1".to_string());
        }
        if let Err(e) = self.filters.validate() {
            errs.push(format!("filters: {e}"));
        }
        if self.prompts.variants.is_empty() {
            errs.push("prompts.variants is empty".to_string());
        }
        if self.datasets.is_empty() {
            errs.push("no datasets configured".to_string());
        }
        if self.analysis.bootstrap_resamples == 0 {
            errs.push("analysis.bootstrap_resamples must be positive".to_string());
        }
        if self.analysis.size_bins.windows(2).any(|w| w[0] >= w[1])
            || self.analysis.size_bins.iter().any(|b| *b <= 0.0)
        {
            errs.push("analysis.size_bins must be positive and increasing".to_string());
        }
        errs
    }
}
