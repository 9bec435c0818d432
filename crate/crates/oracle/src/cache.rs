//! Content-addressed response cache: one JSON file per request, named by the
//! SHA-256 of the request as sent.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::client::{CompletionClient, CompletionRequest, OracleError, RawCompletion};
use crate::templates::TemplateId;

/// Hex SHA-256 of the serialized request (metadata excluded).
pub fn cache_key(request: &CompletionRequest) -> String {
    let bytes = serde_json::to_vec(request).expect("request serialization is infallible");
    hex::encode(Sha256::digest(&bytes))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheEntry {
    pub key: String,
    pub template: TemplateId,
    pub prompt_text: String,
    pub image_count: usize,
    pub response: RawCompletion,
}

fn entry_path(dir: &Path, key: &str) -> PathBuf {
    dir.join(format!("{key}.json"))
}

fn io(path: &Path, source: std::io::Error) -> OracleError {
    OracleError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn read_entry(dir: &Path, key: &str) -> Result<Option<CacheEntry>, OracleError> {
    let path = entry_path(dir, key);
    match fs::read_to_string(&path) {
        Ok(text) => serde_json::from_str(&text).map(Some).map_err(|e| OracleError::SchemaViolation {
            reason: format!("corrupt cache entry {}: {e}", path.display()),
            raw: text,
        }),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
        Err(e) => Err(io(&path, e)),
    }
}

/// Writes via a unique temporary file and a rename, so readers never see a
/// partial entry.
fn write_entry(dir: &Path, entry: &CacheEntry) -> Result<(), OracleError> {
    fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
    let path = entry_path(dir, &entry.key);
    let nanos = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_nanos()).unwrap_or(0);
    let tmp = dir.join(format!(".{}.{}.{nanos}.tmp", entry.key, std::process::id()));
    let text = serde_json::to_string_pretty(entry).expect("cache entry serialization is infallible");
    fs::write(&tmp, text).map_err(|e| io(&tmp, e))?;
    fs::rename(&tmp, &path).map_err(|e| io(&path, e))
}

/// Serves cached responses and persists every new exchange with the inner
/// client.
pub struct CachingClient<C> {
    inner: C,
    dir: PathBuf,
}

impl<C: CompletionClient> CachingClient<C> {
    pub fn new(inner: C, dir: impl Into<PathBuf>) -> Self {
        Self { inner, dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }
}

impl<C: CompletionClient> CompletionClient for CachingClient<C> {
    fn complete(&self, request: &CompletionRequest) -> Result<RawCompletion, OracleError> {
        let key = cache_key(request);
        if let Some(entry) = read_entry(&self.dir, &key)? {
            log::debug!("cache hit {key}");
            return Ok(entry.response);
        }
        let response = self.inner.complete(request)?;
        write_entry(
            &self.dir,
            &CacheEntry {
                key,
                template: request.template,
                prompt_text: request.prompt_text.clone(),
                image_count: request.images.len(),
                response: response.clone(),
            },
        )?;
        Ok(response)
    }
}

/// Answers only from the cache; a miss is an error.
pub struct ReplayClient {
    dir: PathBuf,
}

impl ReplayClient {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }
}

impl CompletionClient for ReplayClient {
    fn complete(&self, request: &CompletionRequest) -> Result<RawCompletion, OracleError> {
        let key = cache_key(request);
        read_entry(&self.dir, &key)?
            .map(|e| e.response)
            .ok_or(OracleError::CacheMiss(key))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::client::Usage;
    use std::sync::atomic::{AtomicU32, Ordering};

    struct Counting(AtomicU32);

    impl CompletionClient for Counting {
        fn complete(&self, r: &CompletionRequest) -> Result<RawCompletion, OracleError> {
            self.0.fetch_add(1, Ordering::SeqCst);
            Ok(RawCompletion {
                text: format!("echo {}", r.prompt_text),
                usage: Usage {
                    input_tokens: 3,
                    output_tokens: 2,
                },
            })
        }
    }

    #[test]
    fn second_call_is_served_from_disk_and_replayable() {
        let dir = tempfile::tempdir().unwrap();
        let client = CachingClient::new(Counting(AtomicU32::new(0)), dir.path());
        let req = CompletionRequest::new(TemplateId::PlanStage, "p".into()).with_meta("stage", "1");
        let a = client.complete(&req).unwrap();
        let b = client.complete(&req).unwrap();
        assert_eq!(a, b);
        assert_eq!(client.inner.0.load(Ordering::SeqCst), 1);
        assert_eq!(ReplayClient::new(dir.path()).complete(&req).unwrap(), a);
        let other = CompletionRequest::new(TemplateId::PlanStage, "q".into());
        assert!(matches!(ReplayClient::new(dir.path()).complete(&other), Err(OracleError::CacheMiss(_))));
        // no temporary files left behind
        let names: Vec<_> = fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
        assert_eq!(names.len(), 1);
    }

    #[test]
    fn metadata_does_not_change_the_key() {
        let a = CompletionRequest::new(TemplateId::PlanStage, "p".into());
        let b = a.clone().with_meta("record", "x");
        assert_eq!(cache_key(&a), cache_key(&b));
        let mut c = a.clone();
        c.temperature = 0.7;
        assert_ne!(cache_key(&a), cache_key(&c));
    }
}
