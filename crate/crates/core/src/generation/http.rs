use std::time::Duration;

use serde_json::{json, Value};

use super::{ApiStyle, CallError, CompletionBackend, CompletionRequest, GenerationConfig, GenerationError};

/// Client for OpenAI-style `chat/completions` and `completions` endpoints.
#[derive(Debug, Clone)]
pub struct HttpBackend {
    client: reqwest::blocking::Client,
    endpoint: String,
    token: Option<String>,
}

impl HttpBackend {
    /// Builds a client for `config.endpoint`. When `auth_env` is set the
    /// variable must exist.
    pub fn new(config: &GenerationConfig) -> Result<Self, GenerationError> {
        let endpoint = config
            .endpoint
            .clone()
            .ok_or_else(|| GenerationError::InvalidConfig("endpoint is required for http models".into()))?;
        let token = match &config.auth_env {
            Some(var) => Some(
                std::env::var(var)
                    .map_err(|_| GenerationError::Auth(format!("environment variable `{var}` is not set")))?,
            ),
            None => None,
        };
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(config.timeout_secs))
            .build()
            .map_err(|e| GenerationError::InvalidConfig(e.to_string()))?;
        Ok(Self {
            client,
            endpoint,
            token,
        })
    }
}

pub(crate) fn request_body(request: &CompletionRequest<'_>) -> Value {
    let cfg = request.config;
    match cfg.api_style {
        ApiStyle::Chat => json!({
            "model": cfg.model_name,
            "messages": [{"role": "user", "content": request.prompt}],
            "temperature": cfg.temperature,
            "top_p": cfg.top_p,
            "max_tokens": cfg.max_tokens,
        }),
        ApiStyle::Completion => json!({
            "model": cfg.model_name,
            "prompt": request.prompt,
            "temperature": cfg.temperature,
            "top_p": cfg.top_p,
            "max_tokens": cfg.max_tokens,
        }),
    }
}

pub(crate) fn response_text(body: &Value, style: ApiStyle) -> Result<String, CallError> {
    let choice = body
        .get("choices")
        .and_then(|c| c.get(0))
        .ok_or_else(|| CallError::Malformed("no choices".into()))?;
    let text = match style {
        ApiStyle::Chat => choice.get("message").and_then(|m| m.get("content")),
        ApiStyle::Completion => choice.get("text"),
    };
    text.and_then(Value::as_str)
        .map(str::to_string)
        .ok_or_else(|| CallError::Malformed("choice has no text".into()))
}

impl CompletionBackend for HttpBackend {
    fn complete(&self, request: &CompletionRequest<'_>) -> Result<String, CallError> {
        let mut builder = self.client.post(&self.endpoint).json(&request_body(request));
        if let Some(token) = &self.token {
            builder = builder.bearer_auth(token);
        }
        let response = builder.send().map_err(|e| CallError::Transport(e.to_string()))?;
        let status = response.status().as_u16();
        if status == 401 || status == 403 {
            return Err(CallError::Auth(format!("endpoint returned {status}")));
        }
        if !response.status().is_success() {
            return Err(CallError::Status(status));
        }
        let body: Value = response.json().map_err(|e| CallError::Malformed(e.to_string()))?;
        response_text(&body, request.config.api_style)
    }
}
