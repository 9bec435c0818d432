//! Which completion service a command talks to.

use std::path::PathBuf;

use retouch_core::plan::parse_plan;
use retouch_oracle::tasks::Oracle;
use retouch_oracle::{CachingClient, HttpClient, ReplayClient, RetryPolicy, StubClient};
use serde::{Deserialize, Serialize};

use crate::error::CliError;
use crate::files::read_text;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClientKind {
    /// Live endpoint from `ORACLE_ENDPOINT`.
    Http,
    /// Deterministic offline answers.
    Stub,
    /// Cached responses only.
    Replay,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClientConfig {
    pub kind: ClientKind,
    /// Plan document whose adjustments the stub answers with.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stub_plan: Option<PathBuf>,
    /// Response cache; every exchange is persisted here when set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cache_dir: Option<PathBuf>,
    #[serde(default = "default_in_flight")]
    pub max_in_flight: usize,
}

fn default_in_flight() -> usize {
    4
}

impl ClientConfig {
    pub fn new(kind: ClientKind) -> Self {
        Self {
            kind,
            stub_plan: None,
            cache_dir: None,
            max_in_flight: default_in_flight(),
        }
    }

    pub fn build(&self) -> Result<Oracle, CliError> {
        let oracle = match self.kind {
            ClientKind::Stub => {
                let stub = match &self.stub_plan {
                    Some(path) => StubClient::with_answers(&parse_plan(&read_text(path)?)?.adjustments()),
                    None => StubClient::new(),
                };
                match &self.cache_dir {
                    Some(dir) => Oracle::new(CachingClient::new(stub, dir)),
                    None => Oracle::new(stub),
                }
                .with_retry(RetryPolicy::immediate())
            }
            ClientKind::Http => {
                let http = HttpClient::from_env(self.max_in_flight)?;
                match &self.cache_dir {
                    Some(dir) => Oracle::new(CachingClient::new(http, dir)),
                    None => Oracle::new(http),
                }
            }
            ClientKind::Replay => {
                let dir = self.cache_dir.as_ref().ok_or_else(|| {
                    CliError::validation("Config", "offline replay needs a cache directory (--cache-dir)")
                })?;
                Oracle::new(ReplayClient::new(dir)).with_retry(RetryPolicy::immediate())
            }
        };
        Ok(oracle)
    }
}
