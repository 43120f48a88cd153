use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::error::GatewayError;
use crate::request::{ChatRequest, ChatResponse, Usage};

/// On-disk record for one request/response pair. Cache files and replay
/// fixtures share this schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheEntry {
    pub request_digest: String,
    pub request: ChatRequest,
    pub response_text: String,
    /// Seconds since the Unix epoch.
    pub timestamp: u64,
    #[serde(default)]
    pub usage: Usage,
}

impl CacheEntry {
    pub fn new(request: &ChatRequest, response: &ChatResponse) -> Self {
        let timestamp = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        Self {
            request_digest: request.digest(),
            request: request.clone(),
            response_text: response.text.clone(),
            timestamp,
            usage: response.usage,
        }
    }

    pub fn to_response(&self) -> ChatResponse {
        ChatResponse {
            text: self.response_text.clone(),
            usage: self.usage,
            cached: true,
        }
    }
}

pub(crate) fn entry_path(dir: &Path, digest: &str) -> PathBuf {
    dir.join(format!("{digest}.json"))
}

/// Reads the entry for `digest` from `dir`.
///
/// `Ok(None)` means no file exists. A file that exists but does not parse,
/// or whose digest disagrees with its name, is reported as
/// [`GatewayError::MalformedResponse`].
pub fn read_entry(dir: &Path, digest: &str) -> Result<Option<CacheEntry>, GatewayError> {
    let path = entry_path(dir, digest);
    let raw = match fs::read_to_string(&path) {
        Ok(raw) => raw,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
        Err(source) => return Err(GatewayError::Io { path, source }),
    };
    let entry: CacheEntry = serde_json::from_str(&raw)
        .map_err(|e| GatewayError::MalformedResponse(format!("{}: {e}", path.display())))?;
    if entry.request_digest != digest {
        return Err(GatewayError::MalformedResponse(format!(
            "{}: digest field {} does not match file name",
            path.display(),
            entry.request_digest
        )));
    }
    Ok(Some(entry))
}

/// Atomically writes `entry` into `dir` (temp file, then rename).
pub fn write_entry(dir: &Path, entry: &CacheEntry) -> Result<PathBuf, GatewayError> {
    let io_err = |path: &Path| {
        let path = path.to_path_buf();
        move |source| GatewayError::Io { path, source }
    };
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let path = entry_path(dir, &entry.request_digest);
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err(dir))?;
    let body = serde_json::to_string_pretty(entry).expect("cache entry serializes");
    tmp.write_all(body.as_bytes()).map_err(io_err(&path))?;
    tmp.write_all(b"\n").map_err(io_err(&path))?;
    tmp.persist(&path).map_err(|e| GatewayError::Io {
        path: path.clone(),
        source: e.error,
    })?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn write_then_read() {
        let dir = tempfile::tempdir().unwrap();
        let req = ChatRequest::user("m", "p", 0.7);
        let resp = ChatResponse {
            text: "[a, r, b]".into(),
            usage: Usage::default(),
            cached: false,
        };
        let entry = CacheEntry::new(&req, &resp);
        write_entry(dir.path(), &entry).unwrap();
        let back = read_entry(dir.path(), &req.digest()).unwrap().unwrap();
        assert_eq!(back, entry);
        assert!(back.to_response().cached);
    }

    #[test]
    fn missing_is_none_and_garbage_is_error() {
        let dir = tempfile::tempdir().unwrap();
        assert!(read_entry(dir.path(), "abc").unwrap().is_none());
        fs::write(dir.path().join("abc.json"), "{not json").unwrap();
        assert!(matches!(
            read_entry(dir.path(), "abc"),
            Err(GatewayError::MalformedResponse(_))
        ));
    }
}
