use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{prompt_hash, LogprobBackend, ProviderError, TokenDistribution};
use crate::prompt::RenderedPrompt;

/// Connection settings for an OpenAI-compatible completions endpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HttpConfig {
    /// Full URL of the completions route, e.g. `http://localhost:8000/v1/completions`.
    pub endpoint: String,
    /// Name of the environment variable holding a bearer token, if any.
    #[serde(default)]
    pub api_key_env: Option<String>,
    #[serde(default = "default_timeout_secs")]
    pub timeout_secs: u64,
}

fn default_timeout_secs() -> u64 {
    60
}

/// Sends one-token completion requests with `logprobs = k` and reads the
/// top-k list for the first generated position.
pub struct HttpBackend {
    config: HttpConfig,
    api_key: Option<String>,
    client: reqwest::blocking::Client,
}

impl HttpBackend {
    pub fn new(config: HttpConfig) -> Result<Self, ProviderError> {
        let api_key = match &config.api_key_env {
            Some(var) => Some(std::env::var(var).map_err(|_| {
                ProviderError::Config(format!("environment variable `{var}` is not set"))
            })?),
            None => None,
        };
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(config.timeout_secs))
            .build()
            .map_err(|e| ProviderError::Config(e.to_string()))?;
        Ok(Self {
            config,
            api_key,
            client,
        })
    }

    fn complete(&self, model_id: &str, prompt: &str, k: usize) -> Result<Value, ProviderError> {
        let body = json!({
            "model": model_id,
            "prompt": prompt,
            "max_tokens": 1,
            "logprobs": k,
            "temperature": 0.0,
        });
        let mut req = self.client.post(&self.config.endpoint).json(&body);
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(|e| ProviderError::Transport {
            attempts: 1,
            message: e.to_string(),
        })?;
        let status = resp.status();
        let text = resp.text().map_err(|e| ProviderError::Transport {
            attempts: 1,
            message: e.to_string(),
        })?;
        if !status.is_success() {
            let mut body = text;
            body.truncate(500);
            return Err(ProviderError::Http {
                status: status.as_u16(),
                attempts: 1,
                body,
            });
        }
        serde_json::from_str(&text)
            .map_err(|e| ProviderError::InvalidResponse(format!("response is not JSON: {e}")))
    }
}

/// Extracts `choices[0].logprobs.top_logprobs[0]` as (token, logprob) pairs.
pub(crate) fn parse_top_logprobs(model_id: &str, v: &Value) -> Result<Vec<(String, f64)>, ProviderError> {
    let choice = v
        .get("choices")
        .and_then(|c| c.get(0))
        .ok_or_else(|| ProviderError::InvalidResponse("missing choices[0]".into()))?;
    let capability = |message: &str| ProviderError::Capability {
        model: model_id.to_string(),
        message: message.to_string(),
    };
    let top = match choice.get("logprobs") {
        None | Some(Value::Null) => return Err(capability("response has no logprobs")),
        Some(lp) => lp.get("top_logprobs").and_then(|t| t.get(0)),
    };
    let obj = match top {
        Some(Value::Object(m)) if !m.is_empty() => m,
        _ => return Err(capability("response has no top_logprobs for the first position")),
    };
    obj.iter()
        .map(|(tok, lp)| {
            lp.as_f64()
                .map(|x| (tok.clone(), x))
                .ok_or_else(|| ProviderError::InvalidResponse(format!("logprob of {tok:?} is not a number")))
        })
        .collect()
}

impl LogprobBackend for HttpBackend {
    fn next_token_logprobs(
        &self,
        model_id: &str,
        prompt: &RenderedPrompt,
        k: usize,
    ) -> Result<TokenDistribution, ProviderError> {
        let v = self.complete(model_id, &prompt.text, k)?;
        let entries = parse_top_logprobs(model_id, &v)?;
        TokenDistribution::new(entries, model_id, prompt_hash(&prompt.text), Some(k))
    }

    fn probe(&self, model_id: &str) -> Result<(), ProviderError> {
        let v = self.complete(model_id, "Hello", 1)?;
        parse_top_logprobs(model_id, &v).map(|_| ())
    }
}
