//! Chat-completions HTTP backend.
//!
//! Speaks the common chat wire shape: POST a JSON body with `model`,
//! `messages`, `temperature`, and `max_tokens`; read the reply text from
//! `choices[0].message.content`. The bearer token is resolved once, at
//! construction, from the environment variable the provider config names.

use super::{AttemptError, ChatBackend, GatewayError, JudgeRequest, ProviderConfig};
use serde::Serialize;
use std::time::Duration;

pub struct HttpBackend {
    client: reqwest::blocking::Client,
    endpoint_url: String,
    api_key: Option<String>,
}

#[derive(Serialize)]
struct WireMessage<'a> {
    role: &'static str,
    content: &'a str,
}

#[derive(Serialize)]
struct WireRequest<'a> {
    model: &'a str,
    messages: [WireMessage<'a>; 1],
    temperature: f64,
    max_tokens: u32,
}

impl HttpBackend {
    pub fn from_config(config: &ProviderConfig) -> Result<Self, GatewayError> {
        let api_key = if config.api_key_env.is_empty() {
            None
        } else {
            match std::env::var(&config.api_key_env) {
                Ok(key) if !key.is_empty() => Some(key),
                _ => {
                    return Err(GatewayError::MissingApiKey {
                        var: config.api_key_env.clone(),
                        provider: config.name.clone(),
                    })
                }
            }
        };
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs_f64(config.timeout_s))
            .build()
            .map_err(|e| GatewayError::Config(format!("http client: {e}")))?;
        Ok(HttpBackend {
            client,
            endpoint_url: config.endpoint_url.clone(),
            api_key,
        })
    }
}

impl ChatBackend for HttpBackend {
    fn send(&self, request: &JudgeRequest) -> Result<String, AttemptError> {
        let body = WireRequest {
            model: &request.model,
            messages: [WireMessage {
                role: "user",
                content: &request.prompt,
            }],
            temperature: request.temperature,
            max_tokens: request.max_tokens,
        };
        let mut builder = self.client.post(&self.endpoint_url).json(&body);
        if let Some(key) = &self.api_key {
            builder = builder.bearer_auth(key);
        }
        let response = builder.send().map_err(|e| {
            if e.is_timeout() {
                AttemptError::Timeout
            } else {
                AttemptError::Transport(e.to_string())
            }
        })?;

        let status = response.status().as_u16();
        match status {
            200..=299 => {}
            401 | 403 => return Err(AttemptError::Auth { status }),
            429 => return Err(AttemptError::RateLimited),
            500..=599 => return Err(AttemptError::ServerError { status }),
            other => return Err(AttemptError::Fatal(format!("unexpected HTTP status {other}"))),
        }

        let value: serde_json::Value = response
            .json()
            .map_err(|e| AttemptError::Malformed(format!("undecodable body: {e}")))?;
        value
            .pointer("/choices/0/message/content")
            .and_then(|v| v.as_str())
            .map(str::to_string)
            .ok_or_else(|| AttemptError::Malformed("missing choices[0].message.content".into()))
    }
}
