//! Record/replay of backend traffic as JSON-lines cassettes.
//!
//! Each line is one [`CassetteRecord`]. Records are keyed by the SHA-256 of
//! the canonical request and carry a second digest over every field. On load,
//! a record whose digests do not match (or a line that does not parse) is
//! quarantined, so a corrupted cassette surfaces as a lookup miss rather than
//! a wrong answer.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::protocol::{canonical_request, request_hash};
use super::{Backend, BackendError, GenerationRequest, RawResponse};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CassetteRecord {
    pub request_hash: String,
    pub canonical_request: String,
    pub response_body: String,
    /// Seconds since the Unix epoch.
    pub timestamp: u64,
    /// SHA-256 over the other four fields.
    pub record_hash: String,
}

impl CassetteRecord {
    pub fn new(canonical_request: String, response_body: String, timestamp: u64) -> Self {
        let request_hash = request_hash(&canonical_request);
        let mut record = Self { request_hash, canonical_request, response_body, timestamp, record_hash: String::new() };
        record.record_hash = record.digest();
        record
    }

    fn digest(&self) -> String {
        let fields = serde_json::json!([self.request_hash, self.canonical_request, self.response_body, self.timestamp]);
        hex::encode(Sha256::digest(fields.to_string().as_bytes()))
    }

    pub fn is_intact(&self) -> bool {
        request_hash(&self.canonical_request) == self.request_hash && self.digest() == self.record_hash
    }
}

/// Forwards to an inner backend and appends every successful exchange.
pub struct RecordingBackend<B> {
    inner: B,
    path: PathBuf,
    file: Mutex<File>,
}

impl<B: Backend> RecordingBackend<B> {
    pub fn new(inner: B, path: impl Into<PathBuf>) -> Result<Self, BackendError> {
        let path = path.into();
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|e| BackendError::Config(format!("cannot open cassette {}: {e}", path.display())))?;
        Ok(Self { inner, path, file: Mutex::new(file) })
    }
}

impl<B: Backend> Backend for RecordingBackend<B> {
    fn identity(&self) -> String {
        format!("record({}):{}", self.path.display(), self.inner.identity())
    }

    fn send(&self, request: &GenerationRequest) -> Result<RawResponse, BackendError> {
        let raw = self.inner.send(request)?;
        let timestamp = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
        let record = CassetteRecord::new(canonical_request(request), raw.body.clone(), timestamp);
        let mut line = serde_json::to_string(&record).expect("plain struct");
        line.push('\n');
        let mut file = self.file.lock().unwrap_or_else(|e| e.into_inner());
        file.write_all(line.as_bytes())
            .and_then(|_| file.flush())
            .map_err(|e| BackendError::Transport(format!("cassette write failed: {e}")))?;
        Ok(raw)
    }

    fn max_in_flight(&self) -> usize {
        self.inner.max_in_flight()
    }
}

/// Serves responses from a cassette; a missing request hash is a
/// [`BackendError::Transport`].
#[derive(Debug, Clone)]
pub struct ReplayBackend {
    source: String,
    records: HashMap<String, String>,
    quarantined: usize,
}

impl ReplayBackend {
    pub fn from_file(path: &Path) -> Result<Self, BackendError> {
        let bytes = std::fs::read(path)
            .map_err(|e| BackendError::Config(format!("cannot read cassette {}: {e}", path.display())))?;
        // Invalid UTF-8 becomes U+FFFD, which fails the digest of that record only.
        Ok(Self::from_jsonl(&String::from_utf8_lossy(&bytes), path.display().to_string()))
    }

    pub fn from_jsonl(text: &str, source: impl Into<String>) -> Self {
        let mut records = HashMap::new();
        let mut quarantined = 0;
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            match serde_json::from_str::<CassetteRecord>(line) {
                Ok(r) if r.is_intact() => {
                    // Later records win, matching append-only re-recording.
                    records.insert(r.request_hash, r.response_body);
                }
                _ => quarantined += 1,
            }
        }
        Self { source: source.into(), records, quarantined }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Lines rejected as malformed or tampered.
    pub fn quarantined(&self) -> usize {
        self.quarantined
    }
}

impl Backend for ReplayBackend {
    fn identity(&self) -> String {
        format!("replay:{}", self.source)
    }

    fn send(&self, request: &GenerationRequest) -> Result<RawResponse, BackendError> {
        let hash = request_hash(&canonical_request(request));
        match self.records.get(&hash) {
            Some(body) => Ok(RawResponse { body: body.clone(), attempts: 1 }),
            None => Err(BackendError::Transport(format!(
                "no cassette record for request {hash} in {} ({} quarantined)",
                self.source, self.quarantined
            ))),
        }
    }

    fn max_in_flight(&self) -> usize {
        usize::MAX
    }
}
