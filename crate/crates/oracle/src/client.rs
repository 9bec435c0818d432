use std::collections::BTreeMap;
use std::time::Duration;

use base64::Engine as _;
use rand::Rng;
use retouch_core::codec::encode_preview;
use retouch_core::plan::PlanError;
use retouch_core::ImageBuffer;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::templates::TemplateId;

pub const MAX_IMAGES: usize = 4;

/// Long-side limit for images sent to the service.
pub const PREVIEW_MAX_SIDE: u32 = 1024;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("service unavailable: {0}")]
    ServiceUnavailable(String),
    #[error("rate limited by the service")]
    RateLimited,
    #[error("response does not follow the expected schema ({reason}); raw response: {raw}")]
    SchemaViolation { reason: String, raw: String },
    #[error("no cached response for request {0}")]
    CacheMiss(String),
    #[error("no value could be resolved for triplet `{0}`")]
    UnresolvableTriplet(String),
    #[error("template {template} needs slot `{slot}`")]
    MissingSlot { template: TemplateId, slot: String },
    #[error("template {0} is used at inference and must not receive ground truth")]
    GroundTruthLeak(TemplateId),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl OracleError {
    /// Errors worth retrying after a delay.
    pub fn is_transient(&self) -> bool {
        matches!(self, OracleError::ServiceUnavailable(_) | OracleError::RateLimited)
    }
}

/// A downscaled 8-bit PNG, base64 encoded.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageAttachment {
    pub label: String,
    pub media_type: String,
    pub data: String,
}

impl ImageAttachment {
    pub fn from_image(label: impl Into<String>, img: &ImageBuffer) -> Result<Self, OracleError> {
        let png = encode_preview(img, PREVIEW_MAX_SIDE).map_err(|e| OracleError::InvalidRequest(e.to_string()))?;
        Ok(Self {
            label: label.into(),
            media_type: "image/png".into(),
            data: base64::engine::general_purpose::STANDARD.encode(png),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionRequest {
    pub template: TemplateId,
    pub prompt_text: String,
    pub images: Vec<ImageAttachment>,
    pub temperature: f64,
    pub max_tokens: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub response_schema: Option<String>,
    /// Local bookkeeping (stage, record id); never sent and not part of the
    /// cache key.
    #[serde(skip)]
    pub metadata: BTreeMap<String, String>,
}

impl CompletionRequest {
    pub fn new(template: TemplateId, prompt_text: String) -> Self {
        Self {
            template,
            prompt_text,
            images: Vec::new(),
            temperature: 0.2,
            max_tokens: 1024,
            response_schema: None,
            metadata: BTreeMap::new(),
        }
    }

    pub fn with_image(mut self, image: ImageAttachment) -> Self {
        self.images.push(image);
        self
    }

    pub fn with_meta(mut self, key: &str, value: impl Into<String>) -> Self {
        self.metadata.insert(key.to_string(), value.into());
        self
    }

    pub fn validate(&self) -> Result<(), OracleError> {
        if self.prompt_text.trim().is_empty() && self.images.is_empty() {
            return Err(OracleError::InvalidRequest("empty prompt and no images".into()));
        }
        if self.images.len() > MAX_IMAGES {
            return Err(OracleError::InvalidRequest(format!(
                "{} images attached, at most {MAX_IMAGES} allowed",
                self.images.len()
            )));
        }
        if !(0.0..=2.0).contains(&self.temperature) {
            return Err(OracleError::InvalidRequest("temperature must lie in [0, 2]".into()));
        }
        if self.max_tokens == 0 {
            return Err(OracleError::InvalidRequest("max_tokens must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Usage {
    pub input_tokens: u64,
    pub output_tokens: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawCompletion {
    pub text: String,
    #[serde(default)]
    pub usage: Usage,
}

/// A completion that passed validation, with its parsed payload.
#[derive(Debug, Clone, PartialEq)]
pub struct CompletionResult<T> {
    pub text: String,
    pub parsed: T,
    pub usage: Usage,
    pub attempts: u32,
}

pub trait CompletionClient: Send + Sync {
    fn complete(&self, request: &CompletionRequest) -> Result<RawCompletion, OracleError>;
}

impl<C: CompletionClient + ?Sized> CompletionClient for &C {
    fn complete(&self, request: &CompletionRequest) -> Result<RawCompletion, OracleError> {
        (**self).complete(request)
    }
}

impl<C: CompletionClient + ?Sized> CompletionClient for Box<C> {
    fn complete(&self, request: &CompletionRequest) -> Result<RawCompletion, OracleError> {
        (**self).complete(request)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetryPolicy {
    pub attempts: u32,
    pub base_delay: Duration,
    pub jitter: bool,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            attempts: 3,
            base_delay: Duration::from_secs(1),
            jitter: true,
        }
    }
}

impl RetryPolicy {
    /// Same attempt budget, no waiting. For tests and offline replay.
    pub fn immediate() -> Self {
        Self {
            base_delay: Duration::ZERO,
            jitter: false,
            ..Self::default()
        }
    }

    /// Delay before retry number `retry` (1-based): `base · 2^(retry-1)`,
    /// scaled by a random factor in [0.5, 1.5) when jittered.
    pub fn delay(&self, retry: u32) -> Duration {
        let base = self.base_delay.mul_f64(2f64.powi(retry.saturating_sub(1) as i32));
        if self.jitter && !base.is_zero() {
            base.mul_f64(rand::rng().random_range(0.5..1.5))
        } else {
            base
        }
    }

    /// Sends `request` until `accept` takes the response. Transient service
    /// errors back off; rejected responses are re-requested. After the last
    /// attempt the most recent error is returned.
    pub fn run<T>(
        &self,
        client: &dyn CompletionClient,
        request: &CompletionRequest,
        mut accept: impl FnMut(&str) -> Result<T, OracleError>,
    ) -> Result<CompletionResult<T>, OracleError> {
        request.validate()?;
        let attempts = self.attempts.max(1);
        let mut last = None;
        for attempt in 1..=attempts {
            if attempt > 1 {
                let wait = match &last {
                    Some(e) if OracleError::is_transient(e) => self.delay(attempt - 1),
                    _ => Duration::ZERO,
                };
                if !wait.is_zero() {
                    std::thread::sleep(wait);
                }
            }
            match client.complete(request) {
                Ok(raw) => match accept(&raw.text) {
                    Ok(parsed) => {
                        return Ok(CompletionResult {
                            text: raw.text,
                            parsed,
                            usage: raw.usage,
                            attempts: attempt,
                        })
                    }
                    Err(e) => {
                        log::warn!("{} attempt {attempt}: rejected response: {e}", request.template);
                        last = Some(e);
                    }
                },
                Err(e) if e.is_transient() => {
                    log::warn!("{} attempt {attempt}: {e}", request.template);
                    last = Some(e);
                }
                Err(e) => return Err(e),
            }
        }
        Err(last.expect("at least one attempt"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::{AtomicU32, Ordering};

    struct Flaky {
        calls: AtomicU32,
        fail_first: u32,
        error: fn() -> OracleError,
    }

    impl CompletionClient for Flaky {
        fn complete(&self, _: &CompletionRequest) -> Result<RawCompletion, OracleError> {
            let n = self.calls.fetch_add(1, Ordering::SeqCst);
            if n < self.fail_first {
                Err((self.error)())
            } else {
                Ok(RawCompletion {
                    text: "ok".into(),
                    usage: Usage::default(),
                })
            }
        }
    }

    fn req() -> CompletionRequest {
        CompletionRequest::new(TemplateId::PlanStage, "hello".into())
    }

    #[test]
    fn retries_transient_errors() {
        let c = Flaky {
            calls: AtomicU32::new(0),
            fail_first: 2,
            error: || OracleError::RateLimited,
        };
        let r = RetryPolicy::immediate().run(&c, &req(), |t| Ok(t.to_string())).unwrap();
        assert_eq!(r.attempts, 3);
        let c = Flaky {
            calls: AtomicU32::new(0),
            fail_first: 3,
            error: || OracleError::ServiceUnavailable("503".into()),
        };
        assert!(matches!(
            RetryPolicy::immediate().run(&c, &req(), |t| Ok(t.to_string())),
            Err(OracleError::ServiceUnavailable(_))
        ));
        assert_eq!(c.calls.load(Ordering::SeqCst), 3);
    }

    #[test]
    fn non_transient_errors_are_not_retried() {
        let c = Flaky {
            calls: AtomicU32::new(0),
            fail_first: 5,
            error: || OracleError::CacheMiss("k".into()),
        };
        assert!(RetryPolicy::immediate().run(&c, &req(), |t| Ok(t.to_string())).is_err());
        assert_eq!(c.calls.load(Ordering::SeqCst), 1);
    }

    #[test]
    fn backoff_doubles() {
        let p = RetryPolicy {
            jitter: false,
            ..RetryPolicy::default()
        };
        assert_eq!(p.delay(1), Duration::from_secs(1));
        assert_eq!(p.delay(2), Duration::from_secs(2));
        assert_eq!(p.delay(3), Duration::from_secs(4));
        let j = RetryPolicy::default().delay(2);
        assert!(j >= Duration::from_secs(1) && j < Duration::from_secs(3));
    }

    #[test]
    fn request_limits() {
        let mut r = req();
        r.temperature = 3.0;
        assert!(r.validate().is_err());
        let img = ImageBuffer::filled(4, 4, [0; 3]);
        let mut r = req();
        for i in 0..5 {
            r = r.with_image(ImageAttachment::from_image(format!("{i}"), &img).unwrap());
        }
        assert!(matches!(r.validate(), Err(OracleError::InvalidRequest(_))));
        assert!(CompletionRequest::new(TemplateId::PlanStage, " ".into()).validate().is_err());
    }
}
