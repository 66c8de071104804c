//! Provider gateway: everything between "here is a rendered prompt" and
//! "here is the judge's raw reply".
//!
//! A [`Gateway`] owns one provider's backend (HTTP chat-completions or the
//! builtin mock), applies retry with exponential backoff and full jitter,
//! optionally rate-limits through a token bucket, and can route calls
//! through an append-only JSONL response cache so re-runs are free and
//! reproducible.

mod cache;
mod http;
mod limiter;
mod mock;

pub use cache::CallCache;
pub use http::HttpBackend;
pub use limiter::TokenBucket;
pub use mock::{MockBackend, MockReply};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::Path;
use std::time::{Duration, Instant};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("authentication rejected by provider (HTTP {status})")]
    Auth { status: u16 },
    #[error("rate limited by provider after {attempts} attempt(s)")]
    RateLimited { attempts: u32 },
    #[error("request timed out after {attempts} attempt(s)")]
    Timeout { attempts: u32 },
    #[error("transport failure after {attempts} attempt(s): {detail}")]
    Transport { attempts: u32, detail: String },
    #[error("provider response malformed: {detail}")]
    MalformedProviderResponse { detail: String },
    #[error("environment variable {var} required by provider {provider} is not set")]
    MissingApiKey { var: String, provider: String },
    #[error("provider config invalid: {0}")]
    Config(String),
    #[error("failed to read {path}: {detail}")]
    Io { path: String, detail: String },
    #[error("cache file corrupt at line {line}: {detail}")]
    CacheCorrupt { line: usize, detail: String },
    #[error("cache I/O failure: {0}")]
    CacheIo(String),
}

/// One provider block from the providers file.
///
/// `api_key_env` names an environment variable; the key itself never
/// appears in config files, flags, or logs. A provider named `mock` uses
/// the in-process [`MockBackend`] and needs no endpoint or key.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProviderConfig {
    pub name: String,
    #[serde(default)]
    pub endpoint_url: String,
    pub model: String,
    #[serde(default)]
    pub api_key_env: String,
    #[serde(default)]
    pub temperature: f64,
    #[serde(default = "default_max_tokens")]
    pub max_tokens: u32,
    #[serde(default = "default_timeout_s")]
    pub timeout_s: f64,
    #[serde(default = "default_max_retries")]
    pub max_retries: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub requests_per_minute: Option<u32>,
}

fn default_max_tokens() -> u32 {
    1024
}

fn default_timeout_s() -> f64 {
    30.0
}

fn default_max_retries() -> u32 {
    3
}

impl ProviderConfig {
    pub fn mock(model: &str) -> Self {
        ProviderConfig {
            name: "mock".to_string(),
            endpoint_url: String::new(),
            model: model.to_string(),
            api_key_env: String::new(),
            temperature: 0.0,
            max_tokens: default_max_tokens(),
            timeout_s: default_timeout_s(),
            max_retries: default_max_retries(),
            requests_per_minute: None,
        }
    }

    pub fn is_mock(&self) -> bool {
        self.name == "mock"
    }

    pub fn validate(&self) -> Result<(), GatewayError> {
        if self.name.is_empty() {
            return Err(GatewayError::Config("provider name must be nonempty".into()));
        }
        if self.model.is_empty() {
            return Err(GatewayError::Config(format!(
                "provider {}: model must be nonempty",
                self.name
            )));
        }
        if !self.is_mock() && self.endpoint_url.is_empty() {
            return Err(GatewayError::Config(format!(
                "provider {}: endpoint_url must be nonempty",
                self.name
            )));
        }
        if !(0.0..=2.0).contains(&self.temperature) {
            return Err(GatewayError::Config(format!(
                "provider {}: temperature {} outside [0, 2]",
                self.name, self.temperature
            )));
        }
        if self.max_tokens == 0 {
            return Err(GatewayError::Config(format!(
                "provider {}: max_tokens must be positive",
                self.name
            )));
        }
        if self.timeout_s <= 0.0 {
            return Err(GatewayError::Config(format!(
                "provider {}: timeout_s must be positive",
                self.name
            )));
        }
        Ok(())
    }
}

#[derive(Deserialize)]
struct ProvidersFile {
    providers: Vec<ProviderConfig>,
}

/// Load and validate a providers file. TOML (`[[providers]]` blocks) or
/// JSON (`{"providers": [...]}`), picked by file extension with TOML as the
/// fallback.
pub fn load_provider_configs(path: &Path) -> Result<Vec<ProviderConfig>, GatewayError> {
    let raw = std::fs::read_to_string(path).map_err(|e| GatewayError::Io {
        path: path.display().to_string(),
        detail: e.to_string(),
    })?;
    let is_json = path.extension().is_some_and(|e| e == "json");
    let file: ProvidersFile = if is_json {
        serde_json::from_str(&raw)
            .map_err(|e| GatewayError::Config(format!("{}: {e}", path.display())))?
    } else {
        toml::from_str(&raw).map_err(|e| GatewayError::Config(format!("{}: {e}", path.display())))?
    };
    if file.providers.is_empty() {
        return Err(GatewayError::Config(format!(
            "{}: providers list is empty",
            path.display()
        )));
    }
    for provider in &file.providers {
        provider.validate()?;
    }
    Ok(file.providers)
}

/// One fully-specified judge call.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JudgeRequest {
    pub prompt: String,
    pub model: String,
    pub temperature: f64,
    pub max_tokens: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompletionResult {
    pub text: String,
    pub latency_ms: u64,
    /// Provider calls made (0 on a cache hit).
    pub attempts: u32,
    pub cache_hit: bool,
}

/// Cache key: hex SHA-256 over a canonical JSON encoding of the provider
/// name and the full request. Any change to prompt bytes, model,
/// temperature, or max_tokens changes the key.
pub fn cache_key(provider_name: &str, request: &JudgeRequest) -> String {
    #[derive(Serialize)]
    struct KeyMaterial<'a> {
        provider: &'a str,
        model: &'a str,
        temperature: f64,
        max_tokens: u32,
        prompt: &'a str,
    }
    let canonical = serde_json::to_string(&KeyMaterial {
        provider: provider_name,
        model: &request.model,
        temperature: request.temperature,
        max_tokens: request.max_tokens,
        prompt: &request.prompt,
    })
    .expect("key material serializes");
    hex::encode(Sha256::digest(canonical.as_bytes()))
}

/// Outcome of a single provider call, before retry classification.
#[derive(Debug)]
pub enum AttemptError {
    /// 401/403 — never retried.
    Auth { status: u16 },
    /// 429 — retried with backoff.
    RateLimited,
    /// 5xx — retried with backoff.
    ServerError { status: u16 },
    /// Request deadline exceeded — retried.
    Timeout,
    /// Connection-level failure — retried.
    Transport(String),
    /// Body arrived but is not a usable completion — never retried.
    Malformed(String),
    /// Anything else fatal (unexpected 4xx, exhausted script) — never retried.
    Fatal(String),
}

impl AttemptError {
    fn is_retryable(&self) -> bool {
        matches!(
            self,
            AttemptError::RateLimited
                | AttemptError::ServerError { .. }
                | AttemptError::Timeout
                | AttemptError::Transport(_)
        )
    }

    fn into_gateway_error(self, attempts: u32) -> GatewayError {
        match self {
            AttemptError::Auth { status } => GatewayError::Auth { status },
            AttemptError::RateLimited => GatewayError::RateLimited { attempts },
            AttemptError::Timeout => GatewayError::Timeout { attempts },
            AttemptError::ServerError { status } => GatewayError::Transport {
                attempts,
                detail: format!("HTTP {status}"),
            },
            AttemptError::Transport(detail) => GatewayError::Transport { attempts, detail },
            AttemptError::Malformed(detail) => {
                GatewayError::MalformedProviderResponse { detail }
            }
            AttemptError::Fatal(detail) => GatewayError::Transport { attempts, detail },
        }
    }
}

/// A single-call provider backend; [`Gateway`] layers policy on top.
pub trait ChatBackend: Send + Sync {
    fn send(&self, request: &JudgeRequest) -> Result<String, AttemptError>;
}

pub struct Gateway {
    backend: Box<dyn ChatBackend>,
    config: ProviderConfig,
    limiter: Option<TokenBucket>,
    retry_base: Duration,
}

impl Gateway {
    /// Build the right backend for a provider: the mock for `name = "mock"`,
    /// HTTP otherwise (resolving the API key from the configured
    /// environment variable).
    pub fn for_config(config: &ProviderConfig) -> Result<Self, GatewayError> {
        config.validate()?;
        let backend: Box<dyn ChatBackend> = if config.is_mock() {
            Box::new(MockBackend::new())
        } else {
            Box::new(HttpBackend::from_config(config)?)
        };
        Ok(Self::with_backend(backend, config.clone()))
    }

    /// Wire an arbitrary backend under this provider config (used by tests
    /// to script failures).
    pub fn with_backend(backend: Box<dyn ChatBackend>, config: ProviderConfig) -> Self {
        let limiter = config.requests_per_minute.map(TokenBucket::per_minute);
        Gateway {
            backend,
            config,
            limiter,
            retry_base: Duration::from_secs(1),
        }
    }

    /// Override the first backoff delay (production default: 1s, doubling
    /// per retry with full jitter).
    pub fn with_retry_base(mut self, base: Duration) -> Self {
        self.retry_base = base;
        self
    }

    pub fn config(&self) -> &ProviderConfig {
        &self.config
    }

    /// Build the request this gateway would send for a rendered prompt.
    pub fn request_for(&self, prompt: impl Into<String>) -> JudgeRequest {
        JudgeRequest {
            prompt: prompt.into(),
            model: self.config.model.clone(),
            temperature: self.config.temperature,
            max_tokens: self.config.max_tokens,
        }
    }

    /// Call the provider, retrying retryable failures (429, 5xx, timeouts,
    /// transport errors) up to `max_retries` extra attempts. Delay before
    /// retry `i` is drawn uniformly from `[0, base * 2^(i-1)]` (full
    /// jitter). Auth failures and malformed bodies are never retried.
    pub fn complete(&self, request: &JudgeRequest) -> Result<CompletionResult, GatewayError> {
        use rand::Rng;
        let started = Instant::now();
        let max_attempts = self.config.max_retries + 1;
        let mut attempt = 0u32;
        loop {
            attempt += 1;
            if let Some(limiter) = &self.limiter {
                limiter.acquire();
            }
            match self.backend.send(request) {
                Ok(text) => {
                    return Ok(CompletionResult {
                        text,
                        latency_ms: started.elapsed().as_millis() as u64,
                        attempts: attempt,
                        cache_hit: false,
                    })
                }
                Err(err) => {
                    if !err.is_retryable() || attempt >= max_attempts {
                        return Err(err.into_gateway_error(attempt));
                    }
                    let ceiling =
                        self.retry_base.as_secs_f64() * 2f64.powi(attempt as i32 - 1);
                    let delay = rand::thread_rng().gen_range(0.0..=ceiling);
                    std::thread::sleep(Duration::from_secs_f64(delay));
                }
            }
        }
    }

    /// Like [`Gateway::complete`], but consult `cache` first and record any
    /// fresh response into it. Hits cost no provider call and report
    /// `cache_hit: true` with zero attempts.
    pub fn cached_complete(
        &self,
        request: &JudgeRequest,
        cache: &CallCache,
    ) -> Result<CompletionResult, GatewayError> {
        let key = cache_key(&self.config.name, request);
        if let Some(text) = cache.get(&key) {
            return Ok(CompletionResult {
                text,
                latency_ms: 0,
                attempts: 0,
                cache_hit: true,
            });
        }
        let result = self.complete(request)?;
        cache.put(&key, &self.config.name, &self.config.model, &result.text)?;
        Ok(result)
    }
}
