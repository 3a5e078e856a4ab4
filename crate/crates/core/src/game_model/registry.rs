use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

/// One same-provider base/aligned model pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairSpec {
    pub pair_id: u32,
    pub base_model_id: String,
    pub aligned_model_id: String,
    pub provider: String,
    /// Parameter count in billions.
    pub param_count: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairRegistry {
    pub schema_version: u32,
    pub pairs: Vec<PairSpec>,
}

#[derive(Debug, thiserror::Error)]
pub enum RegistryError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("duplicate pair_id {0}")]
    DuplicatePairId(u32),
    #[error("pair {pair_id}: {message}")]
    Invalid { pair_id: u32, message: String },
}

impl PairRegistry {
    /// Collects every invariant violation rather than stopping at the first.
    pub fn violations(&self) -> Vec<RegistryError> {
        let mut errs = Vec::new();
        let mut seen = HashSet::new();
        for p in &self.pairs {
            if !seen.insert(p.pair_id) {
                errs.push(RegistryError::DuplicatePairId(p.pair_id));
            }
            if p.base_model_id.is_empty() || p.aligned_model_id.is_empty() {
                errs.push(RegistryError::Invalid {
                    pair_id: p.pair_id,
                    message: "model ids must be nonempty".into(),
                });
            }
            if p.base_model_id == p.aligned_model_id {
                errs.push(RegistryError::Invalid {
                    pair_id: p.pair_id,
                    message: format!("base and aligned are both `{}`", p.base_model_id),
                });
            }
            if !(p.param_count > 0.0) {
                errs.push(RegistryError::Invalid {
                    pair_id: p.pair_id,
                    message: format!("param_count {} must be positive", p.param_count),
                });
            }
        }
        errs
    }

    pub fn get(&self, pair_id: u32) -> Option<&PairSpec> {
        self.pairs.iter().find(|p| p.pair_id == pair_id)
    }
}

/// Parses a registry file without checking invariants.
pub fn load_registry(path: &Path) -> Result<PairRegistry, RegistryError> {
    let text = fs::read_to_string(path).map_err(|source| RegistryError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|e| RegistryError::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}
