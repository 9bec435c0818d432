//! Clients for an external multimodal completion service, the prompt
//! templates sent to it, and the three tasks built on top: reasoning
//! synthesis for puzzle records, per-stage planning, and value resolution.
//!
//! Clients:
//!
//! * [`HttpClient`]: live endpoint from `ORACLE_ENDPOINT` / `ORACLE_API_KEY`.
//! * [`ReplayClient`]: answers only from the response cache.
//! * [`StubClient`]: deterministic, answers from a supplied answer key.
//! * [`CachingClient`]: wraps any client and persists every exchange.

mod cache;
mod client;
mod http;
mod stub;
pub mod tasks;
pub mod templates;

pub use cache::{cache_key, CacheEntry, CachingClient, ReplayClient};
pub use client::{
    CompletionClient, CompletionRequest, CompletionResult, ImageAttachment, OracleError, RawCompletion, RetryPolicy,
    Usage, MAX_IMAGES, PREVIEW_MAX_SIDE,
};
pub use http::HttpClient;
pub use stub::StubClient;
pub use templates::{Template, TemplateId};
