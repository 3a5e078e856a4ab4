use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};

use sha2::{Digest, Sha256};

use super::{ProviderError, TokenDistribution};

static TMP_COUNTER: AtomicU64 = AtomicU64::new(0);

/// Content-addressed store of distributions keyed by `(model_id, prompt_hash, k)`.
///
/// Entries are written to a temporary file and renamed into place, so
/// concurrent writers of the same key never leave a partial file behind.
#[derive(Debug, Clone)]
pub struct DistributionCache {
    root: PathBuf,
}

impl DistributionCache {
    pub fn new(root: impl Into<PathBuf>) -> Result<Self, ProviderError> {
        let root = root.into();
        fs::create_dir_all(&root)
            .map_err(|e| ProviderError::Cache(format!("{}: {e}", root.display())))?;
        Ok(Self { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn key(model_id: &str, prompt_hash: &str, k: usize) -> String {
        let mut h = Sha256::new();
        h.update(model_id.as_bytes());
        h.update([0u8]);
        h.update(prompt_hash.as_bytes());
        h.update([0u8]);
        h.update(k.to_le_bytes());
        hex::encode(h.finalize())
    }

    fn path_for(&self, key: &str) -> PathBuf {
        self.root.join(&key[..2]).join(format!("{key}.json"))
    }

    pub fn get(
        &self,
        model_id: &str,
        prompt_hash: &str,
        k: usize,
    ) -> Result<Option<TokenDistribution>, ProviderError> {
        let path = self.path_for(&Self::key(model_id, prompt_hash, k));
        let text = match fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(ProviderError::Cache(format!("{}: {e}", path.display()))),
        };
        match serde_json::from_str::<TokenDistribution>(&text) {
            Ok(d) if d.model_id == model_id && d.prompt_hash == prompt_hash => Ok(Some(d)),
            Ok(_) => {
                log::warn!("{}: cache entry does not match its key; ignoring", path.display());
                Ok(None)
            }
            Err(e) => {
                log::warn!("{}: unreadable cache entry ({e}); ignoring", path.display());
                Ok(None)
            }
        }
    }

    pub fn put(
        &self,
        model_id: &str,
        prompt_hash: &str,
        k: usize,
        dist: &TokenDistribution,
    ) -> Result<(), ProviderError> {
        let path = self.path_for(&Self::key(model_id, prompt_hash, k));
        let err = |e: std::io::Error| ProviderError::Cache(format!("{}: {e}", path.display()));
        let dir = path.parent().expect("cache path has a parent");
        fs::create_dir_all(dir).map_err(err)?;
        let tmp = dir.join(format!(
            ".tmp-{}-{}",
            std::process::id(),
            TMP_COUNTER.fetch_add(1, Ordering::Relaxed)
        ));
        let body = serde_json::to_vec(dist).map_err(|e| ProviderError::Cache(e.to_string()))?;
        let mut f = fs::File::create(&tmp).map_err(err)?;
        f.write_all(&body).map_err(err)?;
        f.sync_all().map_err(err)?;
        drop(f);
        fs::rename(&tmp, &path).map_err(err)
    }
}
