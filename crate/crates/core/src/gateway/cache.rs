//! Append-only JSONL cache of provider responses.
//!
//! Each line is one completed call, keyed by the request digest from
//! [`super::cache_key`]. Entries are never rewritten; re-opening the file
//! replays every line into an in-memory index. A whole judged run replayed
//! against a warm cache touches the provider zero times.

use super::GatewayError;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::{SystemTime, UNIX_EPOCH};

#[derive(Serialize, Deserialize)]
struct CacheLine {
    key: String,
    provider: String,
    model: String,
    response_text: String,
    created_at: u64,
}

struct CacheState {
    index: HashMap<String, String>,
    file: File,
}

pub struct CallCache {
    path: PathBuf,
    state: Mutex<CacheState>,
}

impl CallCache {
    /// Open (or create) a cache file and index every existing line. An
    /// undecodable line — including one truncated mid-write — fails with
    /// [`GatewayError::CacheCorrupt`] naming its 1-based line number.
    pub fn open(path: impl AsRef<Path>) -> Result<Self, GatewayError> {
        let path = path.as_ref().to_path_buf();
        let mut index = HashMap::new();
        if path.exists() {
            let content = std::fs::read_to_string(&path)
                .map_err(|e| GatewayError::CacheIo(format!("{}: {e}", path.display())))?;
            for (i, line) in content.lines().enumerate() {
                if line.trim().is_empty() {
                    continue;
                }
                let parsed: CacheLine =
                    serde_json::from_str(line).map_err(|e| GatewayError::CacheCorrupt {
                        line: i + 1,
                        detail: e.to_string(),
                    })?;
                index.insert(parsed.key, parsed.response_text);
            }
        }
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|e| GatewayError::CacheIo(format!("{}: {e}", path.display())))?;
        Ok(CallCache {
            path,
            state: Mutex::new(CacheState { index, file }),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn get(&self, key: &str) -> Option<String> {
        self.state.lock().unwrap().index.get(key).cloned()
    }

    /// Record a response. The line is serialized and appended in a single
    /// write under the cache lock, then flushed, so concurrent writers from
    /// one process never interleave partial lines. Re-putting an existing
    /// key is a no-op (append-only, first write wins).
    pub fn put(
        &self,
        key: &str,
        provider: &str,
        model: &str,
        response_text: &str,
    ) -> Result<(), GatewayError> {
        let mut state = self.state.lock().unwrap();
        if state.index.contains_key(key) {
            return Ok(());
        }
        let line = CacheLine {
            key: key.to_string(),
            provider: provider.to_string(),
            model: model.to_string(),
            response_text: response_text.to_string(),
            created_at: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
        };
        let mut bytes = serde_json::to_vec(&line)
            .map_err(|e| GatewayError::CacheIo(e.to_string()))?;
        bytes.push(b'\n');
        state
            .file
            .write_all(&bytes)
            .and_then(|_| state.file.flush())
            .map_err(|e| GatewayError::CacheIo(format!("{}: {e}", self.path.display())))?;
        state.index.insert(line.key, line.response_text);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.state.lock().unwrap().index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
