//! Normalized decision probabilities and their persisted records.

use std::collections::BTreeSet;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::logprob::{alias_hits_may_be_truncated, LabelMass, TokenDistribution};
use crate::prompt::{PromptFormat, RenderedPrompt, VariantName};

#[derive(Debug, thiserror::Error)]
pub enum PredictError {
    #[error("affirmative label `{0}` is not among the label masses")]
    UnknownAffirmative(String),
    #[error("no prediction records")]
    Empty,
    #[error("records mix models `{0}` and `{1}`")]
    MixedModels(String, String),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },
}

/// `mass(affirmative) / Σ mass`, or `None` when the total mass is zero.
pub fn normalize(masses: &LabelMass, affirmative: &str) -> Result<Option<f64>, PredictError> {
    let aff = masses
        .get(affirmative)
        .ok_or_else(|| PredictError::UnknownAffirmative(affirmative.to_string()))?;
    let total: f64 = masses.per_label.values().sum();
    if total <= 0.0 {
        return Ok(None);
    }
    Ok(Some((aff / total).clamp(0.0, 1.0)))
}

/// One model's prediction for one decision point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub decision_point_id: String,
    pub model_id: String,
    pub variant: VariantName,
    pub format: PromptFormat,
    pub label_masses: LabelMass,
    /// `None` marks an invalid record (no mass on any decision label).
    pub p_affirmative: Option<f64>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub truncation_warning: bool,
}

impl PredictionRecord {
    pub fn is_valid(&self) -> bool {
        self.p_affirmative.is_some()
    }

    pub fn total_mass(&self) -> f64 {
        self.label_masses.total_mass
    }

    fn sort_key(&self) -> (&str, VariantName, PromptFormat, &str) {
        (&self.model_id, self.variant, self.format, &self.decision_point_id)
    }
}

/// Builds a record from the matched label masses of a prompt.
pub fn assemble_record(
    prompt: &RenderedPrompt,
    model_id: &str,
    dist: &TokenDistribution,
    masses: LabelMass,
    k: usize,
) -> Result<PredictionRecord, PredictError> {
    let p = normalize(&masses, &prompt.affirmative_label)?;
    let truncation_warning = alias_hits_may_be_truncated(dist, k, &masses);
    if truncation_warning {
        log::warn!(
            "{model_id} / {}: a label's mass is below the smallest listed token; aliases may be truncated",
            prompt.decision_point_id
        );
    }
    Ok(PredictionRecord {
        decision_point_id: prompt.decision_point_id.clone(),
        model_id: model_id.to_string(),
        variant: prompt.variant,
        format: prompt.format,
        label_masses: masses,
        p_affirmative: p,
        truncation_warning,
    })
}

/// Mean total decision mass over a single model's records, invalid records
/// counted at their (zero) mass.
pub fn mean_decision_mass(records: &[PredictionRecord]) -> Result<f64, PredictError> {
    let first = records.first().ok_or(PredictError::Empty)?;
    if let Some(other) = records.iter().find(|r| r.model_id != first.model_id) {
        return Err(PredictError::MixedModels(
            first.model_id.clone(),
            other.model_id.clone(),
        ));
    }
    Ok(records.iter().map(PredictionRecord::total_mass).sum::<f64>() / records.len() as f64)
}

/// Writes records as JSON lines in canonical order
/// (model, variant, format, decision point).
pub fn write_records(path: &Path, records: &[PredictionRecord]) -> Result<(), PredictError> {
    let io = |e: std::io::Error| PredictError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    };
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(io)?;
    }
    let mut sorted: Vec<&PredictionRecord> = records.iter().collect();
    sorted.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
    let mut out = Vec::new();
    for r in sorted {
        serde_json::to_writer(&mut out, r).expect("records serialize");
        out.push(b'\n');
    }
    let mut f = fs::File::create(path).map_err(io)?;
    f.write_all(&out).map_err(io)
}

pub fn read_records(path: &Path) -> Result<Vec<PredictionRecord>, PredictError> {
    let p = path.display().to_string();
    let f = fs::File::open(path).map_err(|e| PredictError::Io {
        path: p.clone(),
        message: e.to_string(),
    })?;
    let mut out = Vec::new();
    let mut seen = BTreeSet::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(|e| PredictError::Io {
            path: p.clone(),
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let parse = |message: String| PredictError::Parse {
            path: p.clone(),
            line: i + 1,
            message,
        };
        let rec: PredictionRecord = serde_json::from_str(&line).map_err(|e| parse(e.to_string()))?;
        let key = (rec.model_id.clone(), rec.variant, rec.format, rec.decision_point_id.clone());
        if !seen.insert(key) {
            return Err(parse(format!("duplicate record for `{}`", rec.decision_point_id)));
        }
        out.push(rec);
    }
    Ok(out)
}
