//! Response generation against completion/chat endpoints, with a replay
//! backend for fixtures and a persistent cache keyed by request content.

mod cache;
mod http;
mod replay;

pub use cache::GenerationCache;
pub use http::HttpBackend;
pub use replay::ReplayBackend;

use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GenerationError {
    #[error("item {index}: endpoint returned status {status}")]
    Endpoint { index: usize, status: u16 },
    #[error("item {index}: retry budget exhausted after {attempts} attempts ({last})")]
    BudgetExhausted { index: usize, attempts: u32, last: String },
    #[error("authentication failed: {0}")]
    Auth(String),
    #[error("item {index}: malformed response: {message}")]
    MalformedResponse { index: usize, message: String },
    #[error("item {index}: no cached response and network access is disabled")]
    CacheMiss { index: usize },
    #[error("item {index}: replay fixture has no response for prompt `{prompt}`")]
    ReplayMiss { index: usize, prompt: String },
    #[error("invalid generation config: {0}")]
    InvalidConfig(String),
    #[error("generation cache: {0}")]
    Cache(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ApiStyle {
    Completion,
    Chat,
}

impl fmt::Display for ApiStyle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ApiStyle::Completion => "completion",
            ApiStyle::Chat => "chat",
        })
    }
}

impl FromStr for ApiStyle {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "completion" => Ok(ApiStyle::Completion),
            "chat" => Ok(ApiStyle::Chat),
            other => Err(format!("unknown api style `{other}`")),
        }
    }
}

/// Decoding parameters and dispatch limits for one model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenerationConfig {
    pub temperature: f64,
    pub top_p: f64,
    pub max_tokens: u32,
    pub n_per_topic: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub endpoint: Option<String>,
    pub model_name: String,
    pub api_style: ApiStyle,
    pub max_parallel: usize,
    /// Maximum attempts per request, including the first.
    pub retry_budget: u32,
    pub backoff_base_ms: u64,
    pub backoff_max_ms: u64,
    pub timeout_secs: u64,
    /// Name of the environment variable holding the bearer token.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub auth_env: Option<String>,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        Self {
            temperature: 0.9,
            top_p: 0.9,
            max_tokens: 96,
            n_per_topic: 2000,
            endpoint: None,
            model_name: String::new(),
            api_style: ApiStyle::Chat,
            max_parallel: 4,
            retry_budget: 5,
            backoff_base_ms: 500,
            backoff_max_ms: 30_000,
            timeout_secs: 60,
            auth_env: None,
        }
    }
}

impl GenerationConfig {
    pub fn validate(&self) -> Result<(), GenerationError> {
        let bad = |m: &str| Err(GenerationError::InvalidConfig(m.to_string()));
        if !self.temperature.is_finite() || self.temperature <= 0.0 {
            return bad("temperature must be positive");
        }
        if !(self.top_p > 0.0 && self.top_p <= 1.0) {
            return bad("top_p must be in (0, 1]");
        }
        if self.max_tokens == 0 {
            return bad("max_tokens must be at least 1");
        }
        if self.n_per_topic == 0 {
            return bad("n_per_topic must be at least 1");
        }
        if self.max_parallel == 0 {
            return bad("max_parallel must be at least 1");
        }
        if self.retry_budget == 0 {
            return bad("retry_budget must be at least 1");
        }
        if self.model_name.is_empty() {
            return bad("model_name is empty");
        }
        Ok(())
    }

    /// Hash over everything that changes what a request returns.
    pub fn config_hash(&self) -> String {
        let mut h = Sha256::new();
        for part in [
            self.model_name.as_str(),
            &self.api_style.to_string(),
            &format!("{:?}", self.temperature),
            &format!("{:?}", self.top_p),
            &self.max_tokens.to_string(),
        ] {
            h.update(part.as_bytes());
            h.update([0u8]);
        }
        hex::encode(&h.finalize()[..8])
    }

    pub fn cache_key(&self, prompt: &str, sample_index: usize) -> String {
        cache_key(&self.model_name, prompt, &self.config_hash(), sample_index)
    }

    fn backoff(&self, attempt: u32) -> Duration {
        let ms = self
            .backoff_base_ms
            .saturating_mul(1u64 << attempt.min(20))
            .min(self.backoff_max_ms);
        Duration::from_millis(ms)
    }
}

pub fn cache_key(model_name: &str, prompt: &str, config_hash: &str, sample_index: usize) -> String {
    let mut h = Sha256::new();
    h.update(model_name.as_bytes());
    h.update([0u8]);
    h.update(prompt.as_bytes());
    h.update([0u8]);
    h.update(config_hash.as_bytes());
    h.update([0u8]);
    h.update(sample_index.to_le_bytes());
    hex::encode(h.finalize())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationRecord {
    pub prompt: String,
    /// Cleaned response text.
    pub response: String,
    pub model_name: String,
    pub config_hash: String,
    pub sample_index: usize,
    /// Cleaning left nothing; excluded from distributions.
    pub empty: bool,
    pub timestamp: u64,
}

impl GenerationRecord {
    pub fn cache_key(&self) -> String {
        cache_key(&self.model_name, &self.prompt, &self.config_hash, self.sample_index)
    }
}

/// Cleaned response text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cleaned {
    pub text: String,
    pub empty: bool,
}

const QUOTE_PAIRS: [(char, char); 4] = [('"', '"'), ('\'', '\''), ('“', '”'), ('‘', '’')];

/// Trims whitespace and one pair of surrounding quotes. Completion-style
/// output is cut at the first blank line, since base models keep going
/// after the tweet.
pub fn clean_response(raw: &str, api_style: ApiStyle) -> Cleaned {
    let mut text = raw.trim();
    if api_style == ApiStyle::Completion {
        let mut end = text.len();
        let mut offset = 0;
        for line in text.split_inclusive('\n') {
            if offset > 0 && line.trim().is_empty() {
                end = offset;
                break;
            }
            offset += line.len();
        }
        text = text[..end].trim();
    }
    for (open, close) in QUOTE_PAIRS {
        if text.chars().count() >= 2 && text.starts_with(open) && text.ends_with(close) {
            text = text[open.len_utf8()..text.len() - close.len_utf8()].trim();
            break;
        }
    }
    Cleaned {
        text: text.to_string(),
        empty: text.is_empty(),
    }
}

/// A single request as seen by a backend.
#[derive(Debug, Clone, Copy)]
pub struct CompletionRequest<'a> {
    pub prompt: &'a str,
    pub sample_index: usize,
    pub config: &'a GenerationConfig,
}

/// Outcome of one failed call.
#[derive(Debug, Clone, PartialEq)]
pub enum CallError {
    Status(u16),
    Transport(String),
    Malformed(String),
    Auth(String),
    Missing,
}

impl CallError {
    fn retryable(&self) -> bool {
        match self {
            CallError::Status(s) => *s == 429 || *s >= 500,
            CallError::Transport(_) => true,
            _ => false,
        }
    }
}

impl fmt::Display for CallError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CallError::Status(s) => write!(f, "status {s}"),
            CallError::Transport(m) => write!(f, "transport error: {m}"),
            CallError::Malformed(m) => write!(f, "malformed response: {m}"),
            CallError::Auth(m) => write!(f, "auth: {m}"),
            CallError::Missing => f.write_str("no response available"),
        }
    }
}

/// Something that turns a prompt into raw model text.
pub trait CompletionBackend: Send + Sync {
    fn complete(&self, request: &CompletionRequest<'_>) -> Result<String, CallError>;
}

/// Backend that refuses every request, standing in for a model whose real
/// backend could not be constructed.
#[derive(Debug, Clone)]
pub struct UnavailableBackend(pub String);

impl CompletionBackend for UnavailableBackend {
    fn complete(&self, _request: &CompletionRequest<'_>) -> Result<String, CallError> {
        Err(CallError::Auth(self.0.clone()))
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct GenerateOptions {
    /// Cache misses become errors instead of requests.
    pub offline: bool,
}

/// Generates one record per prompt, in input order. The prompt's position
/// is its sample index. Cached entries are served without calling the
/// backend; the rest are dispatched on at most `max_parallel` threads.
pub fn generate(
    prompts: &[String],
    config: &GenerationConfig,
    backend: &dyn CompletionBackend,
    cache: Option<&GenerationCache>,
    options: GenerateOptions,
) -> Vec<Result<GenerationRecord, GenerationError>> {
    if let Err(e) = config.validate() {
        return prompts.iter().map(|_| Err(e.clone())).collect();
    }
    let config_hash = config.config_hash();
    let mut results: Vec<Option<Result<GenerationRecord, GenerationError>>> = vec![None; prompts.len()];
    let mut pending = Vec::new();
    for (i, prompt) in prompts.iter().enumerate() {
        let key = cache_key(&config.model_name, prompt, &config_hash, i);
        match cache.and_then(|c| c.get(&key)) {
            Some(record) => results[i] = Some(Ok(record)),
            None if options.offline => results[i] = Some(Err(GenerationError::CacheMiss { index: i })),
            None => pending.push(i),
        }
    }

    let slots: Vec<Mutex<Option<Result<GenerationRecord, GenerationError>>>> =
        pending.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let workers = config.max_parallel.min(pending.len());
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let slot = next.fetch_add(1, Ordering::Relaxed);
                if slot >= pending.len() {
                    break;
                }
                let index = pending[slot];
                let outcome = request_with_retry(&prompts[index], index, config, backend).map(|raw| {
                    let cleaned = clean_response(&raw, config.api_style);
                    GenerationRecord {
                        prompt: prompts[index].clone(),
                        response: cleaned.text,
                        model_name: config.model_name.clone(),
                        config_hash: config_hash.clone(),
                        sample_index: index,
                        empty: cleaned.empty,
                        timestamp: now_secs(),
                    }
                });
                if let (Ok(record), Some(cache)) = (&outcome, cache) {
                    if let Err(e) = cache.insert(record.clone()) {
                        log::warn!("could not persist generation for item {index}: {e}");
                    }
                }
                *slots[slot].lock().unwrap() = Some(outcome);
            });
        }
    });
    for (slot, index) in slots.into_iter().zip(&pending) {
        results[*index] = slot.into_inner().unwrap();
    }
    results.into_iter().map(|r| r.expect("every item resolved")).collect()
}

fn request_with_retry(
    prompt: &str,
    index: usize,
    config: &GenerationConfig,
    backend: &dyn CompletionBackend,
) -> Result<String, GenerationError> {
    let request = CompletionRequest {
        prompt,
        sample_index: index,
        config,
    };
    let mut attempt = 0;
    loop {
        attempt += 1;
        match backend.complete(&request) {
            Ok(text) => {
                if attempt > 1 {
                    log::debug!("item {index}: succeeded after {attempt} attempts");
                }
                return Ok(text);
            }
            Err(e) if e.retryable() && attempt < config.retry_budget => {
                log::debug!("item {index}: attempt {attempt} failed ({e}), retrying");
                std::thread::sleep(config.backoff(attempt - 1));
            }
            Err(e) if e.retryable() => {
                return Err(GenerationError::BudgetExhausted {
                    index,
                    attempts: attempt,
                    last: e.to_string(),
                })
            }
            Err(CallError::Status(status)) => return Err(GenerationError::Endpoint { index, status }),
            Err(CallError::Auth(m)) => return Err(GenerationError::Auth(m)),
            Err(CallError::Malformed(message)) => return Err(GenerationError::MalformedResponse { index, message }),
            Err(CallError::Missing) => {
                return Err(GenerationError::ReplayMiss {
                    index,
                    prompt: prompt.to_string(),
                })
            }
            Err(CallError::Transport(m)) => unreachable!("transport errors are retryable: {m}"),
        }
    }
}

fn now_secs() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}
