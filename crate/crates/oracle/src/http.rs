//! Live endpoint client.
//!
//! Request body (JSON): `{prompt, images: [{label, media_type, data}],
//! temperature, max_tokens, response_schema?, model?}` with
//! `Authorization: Bearer <key>`. The response is either
//! `{"text": ..., "usage": {"input_tokens", "output_tokens"}}` or plain text.

use std::sync::{Condvar, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::client::{CompletionClient, CompletionRequest, ImageAttachment, OracleError, RawCompletion};

pub const ENDPOINT_VAR: &str = "ORACLE_ENDPOINT";
pub const API_KEY_VAR: &str = "ORACLE_API_KEY";
pub const MODEL_VAR: &str = "ORACLE_MODEL";

#[derive(Serialize)]
struct WireRequest<'a> {
    prompt: &'a str,
    images: &'a [ImageAttachment],
    temperature: f64,
    max_tokens: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    response_schema: Option<&'a str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    model: Option<&'a str>,
}

#[derive(Deserialize)]
struct WireResponse {
    text: String,
    #[serde(default)]
    usage: crate::client::Usage,
}

/// Counting semaphore bounding in-flight requests.
struct Limiter {
    in_flight: Mutex<usize>,
    freed: Condvar,
    limit: usize,
}

impl Limiter {
    fn acquire(&self) -> LimiterGuard<'_> {
        let mut n = self.in_flight.lock().unwrap_or_else(|e| e.into_inner());
        while *n >= self.limit {
            n = self.freed.wait(n).unwrap_or_else(|e| e.into_inner());
        }
        *n += 1;
        LimiterGuard(self)
    }
}

struct LimiterGuard<'a>(&'a Limiter);

impl Drop for LimiterGuard<'_> {
    fn drop(&mut self) {
        *self.0.in_flight.lock().unwrap_or_else(|e| e.into_inner()) -= 1;
        self.0.freed.notify_one();
    }
}

pub struct HttpClient {
    endpoint: String,
    api_key: Option<String>,
    model: Option<String>,
    agent: ureq::Agent,
    limiter: Limiter,
}

impl HttpClient {
    pub fn new(endpoint: impl Into<String>, api_key: Option<String>, max_in_flight: usize) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(Duration::from_secs(300)))
            .build()
            .into();
        Self {
            endpoint: endpoint.into(),
            api_key,
            model: None,
            agent,
            limiter: Limiter {
                in_flight: Mutex::new(0),
                freed: Condvar::new(),
                limit: max_in_flight.max(1),
            },
        }
    }

    /// Reads `ORACLE_ENDPOINT` (required), `ORACLE_API_KEY` and
    /// `ORACLE_MODEL` (optional).
    pub fn from_env(max_in_flight: usize) -> Result<Self, OracleError> {
        let endpoint = std::env::var(ENDPOINT_VAR)
            .map_err(|_| OracleError::Config(format!("{ENDPOINT_VAR} is not set")))?;
        let mut client = Self::new(endpoint, std::env::var(API_KEY_VAR).ok(), max_in_flight);
        client.model = std::env::var(MODEL_VAR).ok();
        Ok(client)
    }
}

impl CompletionClient for HttpClient {
    fn complete(&self, request: &CompletionRequest) -> Result<RawCompletion, OracleError> {
        let _slot = self.limiter.acquire();
        let body = WireRequest {
            prompt: &request.prompt_text,
            images: &request.images,
            temperature: request.temperature,
            max_tokens: request.max_tokens,
            response_schema: request.response_schema.as_deref(),
            model: self.model.as_deref(),
        };
        let mut call = self.agent.post(&self.endpoint);
        if let Some(key) = &self.api_key {
            call = call.header("Authorization", &format!("Bearer {key}"));
        }
        let mut response = call
            .send_json(&body)
            .map_err(|e| OracleError::ServiceUnavailable(e.to_string()))?;
        let status = response.status().as_u16();
        let text = response
            .body_mut()
            .read_to_string()
            .map_err(|e| OracleError::ServiceUnavailable(e.to_string()))?;
        match status {
            200..=299 => Ok(match serde_json::from_str::<WireResponse>(&text) {
                Ok(w) => RawCompletion {
                    text: w.text,
                    usage: w.usage,
                },
                Err(_) => RawCompletion {
                    text,
                    usage: Default::default(),
                },
            }),
            429 => Err(OracleError::RateLimited),
            500..=599 => Err(OracleError::ServiceUnavailable(format!("HTTP {status}"))),
            _ => Err(OracleError::Config(format!("endpoint answered HTTP {status}: {text}"))),
        }
    }
}
