//! Line-delimited JSON dataset files and their sidecar manifests.
//!
//! A dataset `bargaining.jsonl` holds one decision point per line. An
//! optional `bargaining.manifest.json` next to it declares the family, the
//! record count, and the schema version; when present, both are checked.

use std::collections::HashSet;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{DecisionPoint, FamilyConfig, GameFamily, InvariantError, Turn};

pub const DATASET_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: malformed record{}: {message}", field.as_ref().map(|f| format!(" (field `{f}`)")).unwrap_or_default())]
    Malformed {
        line: usize,
        field: Option<String>,
        message: String,
    },
    #[error("line {line} (record `{id}`): {source}")]
    Invariant {
        line: usize,
        id: String,
        #[source]
        source: InvariantError,
    },
    #[error("line {line}: record family {found} does not match requested family {expected}")]
    FamilyMismatch {
        line: usize,
        expected: GameFamily,
        found: GameFamily,
    },
    #[error("line {line}: duplicate decision point id `{id}`")]
    DuplicateId { line: usize, id: String },
    #[error("manifest {path}: {message}")]
    Manifest { path: PathBuf, message: String },
}

/// Sidecar manifest describing one dataset file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub family: GameFamily,
    pub record_count: usize,
    pub schema_version: u32,
}

#[derive(Serialize, Deserialize)]
struct RawRecord {
    id: String,
    family: GameFamily,
    config: serde_json::Value,
    round_index: u32,
    #[serde(default)]
    role: String,
    #[serde(default)]
    history: Vec<Turn>,
    decision_labels: Vec<String>,
    affirmative_label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    human_choice: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    aggregate_choice_rate: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    n_participants: Option<u32>,
}

/// `foo.jsonl` → `foo.manifest.json`.
pub fn manifest_path_for(path: &Path) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    path.with_file_name(format!("{stem}.manifest.json"))
}

fn backticked(message: &str) -> Option<String> {
    let start = message.find('`')? + 1;
    let len = message[start..].find('`')?;
    Some(message[start..start + len].to_string())
}

fn parse_line(line_no: usize, text: &str, family: GameFamily) -> Result<DecisionPoint, DatasetError> {
    let raw: RawRecord = serde_json::from_str(text).map_err(|e| {
        let message = e.to_string();
        DatasetError::Malformed {
            line: line_no,
            field: backticked(&message),
            message,
        }
    })?;
    if raw.family != family {
        return Err(DatasetError::FamilyMismatch {
            line: line_no,
            expected: family,
            found: raw.family,
        });
    }
    let config = FamilyConfig::from_json(raw.family, raw.config).map_err(|e| {
        let message = e.to_string();
        DatasetError::Malformed {
            line: line_no,
            field: Some(format!("config.{}", backticked(&message).unwrap_or_default())),
            message,
        }
    })?;
    // Aggregate records may omit the individual choice; use the majority side.
    let human_choice = match raw.human_choice {
        Some(c) => c,
        None => match raw.aggregate_choice_rate {
            Some(rate) if family.is_aggregate() => {
                if rate >= 0.5 {
                    raw.affirmative_label.clone()
                } else {
                    raw.decision_labels
                        .iter()
                        .find(|l| **l != raw.affirmative_label)
                        .cloned()
                        .unwrap_or_default()
                }
            }
            _ => {
                return Err(DatasetError::Malformed {
                    line: line_no,
                    field: Some("human_choice".into()),
                    message: "missing field `human_choice`".into(),
                })
            }
        },
    };
    let dp = DecisionPoint {
        id: raw.id,
        family: raw.family,
        config,
        round_index: raw.round_index,
        role: raw.role,
        history: raw.history,
        decision_labels: raw.decision_labels,
        affirmative_label: raw.affirmative_label,
        human_choice,
        aggregate_choice_rate: raw.aggregate_choice_rate,
        n_participants: raw.n_participants,
    };
    dp.validate().map_err(|source| DatasetError::Invariant {
        line: line_no,
        id: dp.id.clone(),
        source,
    })?;
    Ok(dp)
}

fn read_manifest(path: &Path) -> Result<Option<DatasetManifest>, DatasetError> {
    let mpath = manifest_path_for(path);
    if !mpath.exists() {
        return Ok(None);
    }
    let text = fs::read_to_string(&mpath).map_err(|source| DatasetError::Io {
        path: mpath.clone(),
        source,
    })?;
    serde_json::from_str(&text)
        .map(Some)
        .map_err(|e| DatasetError::Manifest {
            path: mpath,
            message: e.to_string(),
        })
}

/// Loads every decision point of `family` from a line-delimited file.
///
/// Blank lines are skipped. An empty file yields an empty list.
pub fn load_dataset(path: &Path, family: GameFamily) -> Result<Vec<DecisionPoint>, DatasetError> {
    let file = fs::File::open(path).map_err(|source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|source| DatasetError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let dp = parse_line(line_no, &line, family)?;
        if !seen.insert(dp.id.clone()) {
            return Err(DatasetError::DuplicateId {
                line: line_no,
                id: dp.id,
            });
        }
        out.push(dp);
    }

    if let Some(manifest) = read_manifest(path)? {
        let mpath = manifest_path_for(path);
        if manifest.family != family {
            return Err(DatasetError::Manifest {
                path: mpath,
                message: format!("declares family {} but {family} was requested", manifest.family),
            });
        }
        if manifest.schema_version != DATASET_SCHEMA_VERSION {
            return Err(DatasetError::Manifest {
                path: mpath,
                message: format!(
                    "schema version {} is not supported (expected {DATASET_SCHEMA_VERSION})",
                    manifest.schema_version
                ),
            });
        }
        if manifest.record_count != out.len() {
            return Err(DatasetError::Manifest {
                path: mpath,
                message: format!(
                    "declares {} records but the file holds {}",
                    manifest.record_count,
                    out.len()
                ),
            });
        }
    }
    Ok(out)
}

fn to_raw(dp: &DecisionPoint) -> RawRecord {
    RawRecord {
        id: dp.id.clone(),
        family: dp.family,
        config: dp.config.to_json(),
        round_index: dp.round_index,
        role: dp.role.clone(),
        history: dp.history.clone(),
        decision_labels: dp.decision_labels.clone(),
        affirmative_label: dp.affirmative_label.clone(),
        human_choice: Some(dp.human_choice.clone()),
        aggregate_choice_rate: dp.aggregate_choice_rate,
        n_participants: dp.n_participants,
    }
}

/// Serializes one decision point as a single JSON line (no trailing newline).
pub fn to_json_line(dp: &DecisionPoint) -> String {
    serde_json::to_string(&to_raw(dp)).expect("record serializes")
}

/// Writes a dataset file plus its sidecar manifest.
pub fn write_dataset(path: &Path, family: GameFamily, dps: &[DecisionPoint]) -> Result<(), DatasetError> {
    let io_err = |p: &Path| {
        let p = p.to_path_buf();
        move |source| DatasetError::Io { path: p, source }
    };
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(io_err(parent))?;
    }
    let mut buf = Vec::new();
    for dp in dps {
        buf.extend_from_slice(to_json_line(dp).as_bytes());
        buf.push(b'\n');
    }
    fs::File::create(path)
        .and_then(|mut f| f.write_all(&buf))
        .map_err(io_err(path))?;
    let manifest = DatasetManifest {
        family,
        record_count: dps.len(),
        schema_version: DATASET_SCHEMA_VERSION,
    };
    let mpath = manifest_path_for(path);
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(&mpath, text + "\n").map_err(io_err(&mpath))?;
    Ok(())
}
