//! Next-token log-probability retrieval and decision-token matching.

mod cache;
mod http;
mod mock;

pub use cache::DistributionCache;
pub use http::{HttpBackend, HttpConfig};
pub use mock::{MockBackend, MockBehavior};

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::prompt::RenderedPrompt;

/// Default number of top entries requested per forward pass.
pub const DEFAULT_TOP_K: usize = 20;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ProviderError {
    #[error("transport failure after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },
    #[error("HTTP {status} after {attempts} attempt(s): {body}")]
    Http {
        status: u16,
        attempts: u32,
        body: String,
    },
    #[error("model `{model}` does not return log-probabilities: {message}")]
    Capability { model: String, message: String },
    #[error("invalid response: {0}")]
    InvalidResponse(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("cache error: {0}")]
    Cache(String),
}

impl ProviderError {
    /// Whether retrying the identical request may succeed.
    pub fn is_transient(&self) -> bool {
        match self {
            ProviderError::Transport { .. } => true,
            ProviderError::Http { status, .. } => *status == 429 || *status >= 500,
            _ => false,
        }
    }

    fn with_attempts(self, n: u32) -> Self {
        match self {
            ProviderError::Transport { message, .. } => ProviderError::Transport { attempts: n, message },
            ProviderError::Http { status, body, .. } => ProviderError::Http {
                status,
                attempts: n,
                body,
            },
            other => other,
        }
    }
}

/// Hex SHA-256 of the prompt text.
pub fn prompt_hash(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

/// Top-k (token, logprob) entries for the single next-token position.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenDistribution {
    pub entries: Vec<(String, f64)>,
    pub model_id: String,
    pub prompt_hash: String,
}

impl TokenDistribution {
    /// Builds a distribution, sorting entries by descending logprob and
    /// truncating to `k` when given.
    pub fn new(
        mut entries: Vec<(String, f64)>,
        model_id: impl Into<String>,
        prompt_hash: impl Into<String>,
        k: Option<usize>,
    ) -> Result<Self, ProviderError> {
        for (tok, lp) in entries.iter_mut() {
            if lp.is_nan() {
                return Err(ProviderError::InvalidResponse(format!("logprob of {tok:?} is NaN")));
            }
            // Servers occasionally round a near-certain token to a tiny positive value.
            if *lp > 0.0 {
                if *lp > 1e-6 {
                    return Err(ProviderError::InvalidResponse(format!(
                        "logprob of {tok:?} is positive ({lp})"
                    )));
                }
                *lp = 0.0;
            }
        }
        entries.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        let mut seen = BTreeSet::new();
        for (tok, _) in &entries {
            if !seen.insert(tok.as_str()) {
                return Err(ProviderError::InvalidResponse(format!("duplicate token {tok:?}")));
            }
        }
        if let Some(k) = k {
            entries.truncate(k);
        }
        let total: f64 = entries.iter().map(|(_, lp)| lp.exp()).sum();
        if total > 1.0 + 1e-6 {
            return Err(ProviderError::InvalidResponse(format!(
                "probabilities sum to {total}"
            )));
        }
        Ok(Self {
            entries,
            model_id: model_id.into(),
            prompt_hash: prompt_hash.into(),
        })
    }

    pub fn total_probability(&self) -> f64 {
        self.entries.iter().map(|(_, lp)| lp.exp()).sum()
    }
}

/// Probability mass on each decision label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelMass {
    pub per_label: BTreeMap<String, f64>,
    pub total_mass: f64,
}

impl LabelMass {
    pub fn from_pairs<I, S>(pairs: I) -> Self
    where
        I: IntoIterator<Item = (S, f64)>,
        S: Into<String>,
    {
        let per_label: BTreeMap<String, f64> =
            pairs.into_iter().map(|(l, m)| (l.into(), m)).collect();
        let total_mass = per_label.values().sum();
        Self {
            per_label,
            total_mass,
        }
    }

    pub fn get(&self, label: &str) -> Option<f64> {
        self.per_label.get(label).copied()
    }
}

/// Token surface forms recognized for each decision label.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AliasTable {
    pub per_label: BTreeMap<String, BTreeSet<String>>,
}

fn capitalize(s: &str) -> String {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) => c.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}

impl AliasTable {
    /// Exact form, capitalized form, and both with a leading space.
    pub fn default_for<S: AsRef<str>>(labels: &[S]) -> Self {
        let per_label = labels
            .iter()
            .map(|l| {
                let l = l.as_ref();
                let cap = capitalize(l);
                let set: BTreeSet<String> =
                    [l.to_string(), cap.clone(), format!(" {l}"), format!(" {cap}")]
                        .into_iter()
                        .collect();
                (l.to_string(), set)
            })
            .collect();
        Self { per_label }
    }

    pub fn total_aliases(&self) -> usize {
        self.per_label.values().map(BTreeSet::len).sum()
    }

    /// Fails when some token is an alias of two different labels.
    pub fn check_disjoint(&self) -> Result<(), ProviderError> {
        let mut owner: HashMap<&str, &str> = HashMap::new();
        for (label, aliases) in &self.per_label {
            for a in aliases {
                if let Some(prev) = owner.insert(a.as_str(), label.as_str()) {
                    return Err(ProviderError::Config(format!(
                        "token {a:?} is an alias of both `{prev}` and `{label}`"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Sums the probability of every alias token of each label.
pub fn match_decision_tokens<S: AsRef<str>>(
    dist: &TokenDistribution,
    labels: &[S],
    aliases: &AliasTable,
) -> Result<LabelMass, ProviderError> {
    aliases.check_disjoint()?;
    let probs: HashMap<&str, f64> = dist
        .entries
        .iter()
        .map(|(t, lp)| (t.as_str(), lp.exp()))
        .collect();
    let mut per_label = BTreeMap::new();
    for label in labels {
        let label = label.as_ref();
        let forms = aliases.per_label.get(label).ok_or_else(|| {
            ProviderError::Config(format!("alias table has no entry for label `{label}`"))
        })?;
        let mass: f64 = forms.iter().filter_map(|f| probs.get(f.as_str())).sum();
        per_label.insert(label.to_string(), mass);
    }
    let total_mass = per_label.values().sum();
    Ok(LabelMass {
        per_label,
        total_mass,
    })
}

/// True when the list is full (`k` entries) and some label's mass falls
/// below the smallest listed entry, so an unlisted alias could have been cut.
pub fn alias_hits_may_be_truncated(dist: &TokenDistribution, k: usize, mass: &LabelMass) -> bool {
    if dist.entries.len() < k {
        return false;
    }
    let Some((_, kth)) = dist.entries.last() else {
        return false;
    };
    let kth = kth.exp();
    mass.per_label.values().any(|m| *m < kth)
}

/// A source of next-token distributions: a remote endpoint or a mock.
pub trait LogprobBackend: Send + Sync {
    fn next_token_logprobs(
        &self,
        model_id: &str,
        prompt: &RenderedPrompt,
        k: usize,
    ) -> Result<TokenDistribution, ProviderError>;

    /// Cheap check that `model_id` is served with log-probabilities.
    fn probe(&self, _model_id: &str) -> Result<(), ProviderError> {
        Ok(())
    }
}

impl<T: LogprobBackend + ?Sized> LogprobBackend for Box<T> {
    fn next_token_logprobs(
        &self,
        model_id: &str,
        prompt: &RenderedPrompt,
        k: usize,
    ) -> Result<TokenDistribution, ProviderError> {
        (**self).next_token_logprobs(model_id, prompt, k)
    }

    fn probe(&self, model_id: &str) -> Result<(), ProviderError> {
        (**self).probe(model_id)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub base_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_attempts: 4,
            base_delay: Duration::from_millis(250),
        }
    }
}

/// Wraps a backend with retries, an in-memory cache, and an optional
/// content-addressed on-disk cache.
pub struct LogprobProvider<B> {
    backend: B,
    retry: RetryPolicy,
    disk: Option<DistributionCache>,
    memory: Mutex<HashMap<(String, String, usize), TokenDistribution>>,
    backend_calls: AtomicUsize,
}

impl<B: LogprobBackend> LogprobProvider<B> {
    pub fn new(backend: B) -> Self {
        Self {
            backend,
            retry: RetryPolicy::default(),
            disk: None,
            memory: Mutex::new(HashMap::new()),
            backend_calls: AtomicUsize::new(0),
        }
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn with_disk_cache(mut self, cache: DistributionCache) -> Self {
        self.disk = Some(cache);
        self
    }

    pub fn backend(&self) -> &B {
        &self.backend
    }

    /// Number of requests that reached the backend (cache misses × attempts).
    pub fn backend_calls(&self) -> usize {
        self.backend_calls.load(Ordering::Relaxed)
    }

    pub fn probe(&self, model_id: &str) -> Result<(), ProviderError> {
        self.backend.probe(model_id)
    }

    pub fn fetch_next_token_logprobs(
        &self,
        model_id: &str,
        prompt: &RenderedPrompt,
        k: usize,
    ) -> Result<TokenDistribution, ProviderError> {
        let hash = prompt_hash(&prompt.text);
        let key = (model_id.to_string(), hash.clone(), k);
        if let Some(hit) = self.memory.lock().expect("cache lock").get(&key) {
            return Ok(hit.clone());
        }
        if let Some(disk) = &self.disk {
            if let Some(hit) = disk.get(model_id, &hash, k)? {
                self.memory.lock().expect("cache lock").insert(key, hit.clone());
                return Ok(hit);
            }
        }

        let mut attempt = 0;
        let dist = loop {
            attempt += 1;
            self.backend_calls.fetch_add(1, Ordering::Relaxed);
            match self.backend.next_token_logprobs(model_id, prompt, k) {
                Ok(d) => break d,
                Err(e) if e.is_transient() && attempt < self.retry.max_attempts => {
                    log::debug!("{model_id}: attempt {attempt} failed ({e}); retrying");
                    std::thread::sleep(self.retry.base_delay * 2u32.pow(attempt - 1));
                }
                Err(e) => return Err(e.with_attempts(attempt)),
            }
        };
        if dist.entries.len() > k {
            return Err(ProviderError::InvalidResponse(format!(
                "backend returned {} entries for k = {k}",
                dist.entries.len()
            )));
        }
        if let Some(disk) = &self.disk {
            disk.put(model_id, &hash, k, &dist)?;
        }
        self.memory.lock().expect("cache lock").insert(key, dist.clone());
        Ok(dist)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prompt::{PromptFormat, VariantName};
    use proptest::prelude::*;

    fn dist(entries: &[(&str, f64)]) -> TokenDistribution {
        TokenDistribution::new(
            entries.iter().map(|(t, p)| (t.to_string(), p.ln())).collect(),
            "m",
            "h",
            None,
        )
        .unwrap()
    }

    #[test]
    fn direct_sum_over_labels() {
        let d = dist(&[("accept", 0.6), ("reject", 0.3)]);
        let m = match_decision_tokens(&d, &["accept", "reject"], &AliasTable::default_for(&["accept", "reject"])).unwrap();
        assert!((m.get("accept").unwrap() - 0.6).abs() < 1e-12);
        assert!((m.get("reject").unwrap() - 0.3).abs() < 1e-12);
        assert!((m.total_mass - 0.9).abs() < 1e-12);
    }

    #[test]
    fn aliases_are_unioned() {
        let d = dist(&[("Accept", 0.5), (" accept", 0.2)]);
        let m = match_decision_tokens(&d, &["accept", "reject"], &AliasTable::default_for(&["accept", "reject"])).unwrap();
        assert!((m.get("accept").unwrap() - 0.7).abs() < 1e-12);
        assert_eq!(m.get("reject").unwrap(), 0.0);
    }

    #[test]
    fn no_decision_tokens_gives_zero_mass() {
        let d = dist(&[("the", 0.5), ("\n", 0.2)]);
        let m = match_decision_tokens(&d, &["yes", "no"], &AliasTable::default_for(&["yes", "no"])).unwrap();
        assert_eq!(m.total_mass, 0.0);
        assert_eq!(m.per_label.len(), 2);
    }

    #[test]
    fn overlapping_aliases_rejected() {
        let mut table = AliasTable::default_for(&["A", "B"]);
        table.per_label.get_mut("B").unwrap().insert(" A".into());
        let d = dist(&[("A", 0.5)]);
        assert!(matches!(
            match_decision_tokens(&d, &["A", "B"], &table),
            Err(ProviderError::Config(_))
        ));
    }

    #[test]
    fn default_aliases_for_case_insensitive_labels() {
        let t = AliasTable::default_for(&["AcceptOffer"]);
        assert_eq!(t.per_label["AcceptOffer"].len(), 2);
        let t = AliasTable::default_for(&["yes"]);
        assert_eq!(
            t.per_label["yes"],
            ["yes", "Yes", " yes", " Yes"].iter().map(|s| s.to_string()).collect()
        );
    }

    #[test]
    fn distribution_validation() {
        assert!(TokenDistribution::new(vec![("a".into(), 0.5)], "m", "h", None).is_err());
        assert!(TokenDistribution::new(vec![("a".into(), -0.1), ("a".into(), -3.0)], "m", "h", None).is_err());
        assert!(TokenDistribution::new(vec![("a".into(), (0.7f64).ln()), ("b".into(), (0.6f64).ln())], "m", "h", None).is_err());
        let d = TokenDistribution::new(
            vec![("b".into(), -2.0), ("a".into(), -0.5), ("c".into(), -1.0)],
            "m",
            "h",
            Some(2),
        )
        .unwrap();
        assert_eq!(d.entries.iter().map(|e| e.0.as_str()).collect::<Vec<_>>(), ["a", "c"]);
    }

    #[test]
    fn truncation_warning() {
        let d = dist(&[("the", 0.5), ("accept", 0.3)]);
        let m = LabelMass::from_pairs([("accept", 0.3), ("reject", 0.0)]);
        assert!(alias_hits_may_be_truncated(&d, 2, &m));
        assert!(!alias_hits_may_be_truncated(&d, 5, &m));
        let m = LabelMass::from_pairs([("accept", 0.3)]);
        assert!(!alias_hits_may_be_truncated(&d, 2, &m));
    }

    struct Flaky {
        failures: AtomicUsize,
        status: u16,
    }

    impl LogprobBackend for Flaky {
        fn next_token_logprobs(&self, model_id: &str, prompt: &RenderedPrompt, _k: usize) -> Result<TokenDistribution, ProviderError> {
            if self.failures.load(Ordering::SeqCst) > 0 {
                self.failures.fetch_sub(1, Ordering::SeqCst);
                return Err(ProviderError::Http { status: self.status, attempts: 1, body: "busy".into() });
            }
            TokenDistribution::new(vec![("yes".into(), -0.1)], model_id, prompt_hash(&prompt.text), None)
        }
    }

    fn prompt(text: &str) -> RenderedPrompt {
        RenderedPrompt {
            text: text.into(),
            format: PromptFormat::Standard,
            variant: VariantName::Standard,
            decision_point_id: "d".into(),
            expected_labels: vec!["yes".into(), "no".into()],
            affirmative_label: "yes".into(),
        }
    }

    fn fast_retry() -> RetryPolicy {
        RetryPolicy { max_attempts: 3, base_delay: Duration::from_millis(1) }
    }

    #[test]
    fn transient_failures_are_retried_and_cached() {
        let p = LogprobProvider::new(Flaky { failures: AtomicUsize::new(2), status: 503 }).with_retry(fast_retry());
        let a = p.fetch_next_token_logprobs("m", &prompt("x"), 5).unwrap();
        assert_eq!(p.backend_calls(), 3);
        let b = p.fetch_next_token_logprobs("m", &prompt("x"), 5).unwrap();
        assert_eq!(a, b);
        assert_eq!(p.backend_calls(), 3);
    }

    #[test]
    fn retries_are_bounded() {
        let p = LogprobProvider::new(Flaky { failures: AtomicUsize::new(10), status: 500 }).with_retry(fast_retry());
        match p.fetch_next_token_logprobs("m", &prompt("x"), 5).unwrap_err() {
            ProviderError::Http { status: 500, attempts: 3, .. } => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn client_errors_are_not_retried() {
        let p = LogprobProvider::new(Flaky { failures: AtomicUsize::new(10), status: 400 }).with_retry(fast_retry());
        assert!(matches!(
            p.fetch_next_token_logprobs("m", &prompt("x"), 5),
            Err(ProviderError::Http { status: 400, attempts: 1, .. })
        ));
        assert_eq!(p.backend_calls(), 1);
    }

    fn entries() -> impl Strategy<Value = Vec<(String, f64)>> {
        let tokens = prop::sample::select(vec!["accept", "Accept", " accept", "reject", " Reject", "the", "a", "\n"]);
        prop::collection::btree_map(tokens, 0.001f64..0.12, 0..8)
            .prop_map(|m| m.into_iter().map(|(t, p)| (t.to_string(), p.ln())).collect())
    }

    proptest! {
        #[test]
        fn matching_is_permutation_invariant(e in entries(), seed in any::<u64>()) {
            let labels = ["accept", "reject"];
            let table = AliasTable::default_for(&labels);
            let d1 = TokenDistribution { entries: e.clone(), model_id: "m".into(), prompt_hash: "h".into() };
            let mut shuffled = e.clone();
            let n = shuffled.len();
            if n > 1 {
                shuffled.rotate_left((seed as usize) % n);
                shuffled.swap(0, n - 1);
            }
            let d2 = TokenDistribution { entries: shuffled, model_id: "m".into(), prompt_hash: "h".into() };
            let m1 = match_decision_tokens(&d1, &labels, &table).unwrap();
            let m2 = match_decision_tokens(&d2, &labels, &table).unwrap();
            for l in labels {
                prop_assert!((m1.get(l).unwrap() - m2.get(l).unwrap()).abs() < 1e-12);
            }
        }

        #[test]
        fn adding_an_entry_never_decreases_mass(e in entries(), extra_p in 0.001f64..0.05, which in 0usize..4) {
            let labels = ["accept", "reject"];
            let table = AliasTable::default_for(&labels);
            let extra = ["Reject", " Accept", "zzz", "reject"][which];
            prop_assume!(!e.iter().any(|(t, _)| t == extra));
            let before = TokenDistribution { entries: e.clone(), model_id: "m".into(), prompt_hash: "h".into() };
            let mut more = e;
            more.push((extra.to_string(), extra_p.ln()));
            let after = TokenDistribution { entries: more, model_id: "m".into(), prompt_hash: "h".into() };
            let m1 = match_decision_tokens(&before, &labels, &table).unwrap();
            let m2 = match_decision_tokens(&after, &labels, &table).unwrap();
            for l in labels {
                prop_assert!(m2.get(l).unwrap() >= m1.get(l).unwrap());
            }
        }
    }
}
