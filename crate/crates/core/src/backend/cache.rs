//! Append-only JSON-lines transcript cache keyed by prompt + params digest.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::params::CompletionParams;
use crate::digest::sha256_parts;

#[derive(Debug, Error)]
pub enum CacheError {
    #[error("transcript cache {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("transcript cache {path} line {line}: {message}")]
    Corrupt { path: PathBuf, line: usize, message: String },
    #[error("conflicting completions recorded for digest {0}")]
    Conflict(String),
    #[error("entry digest {stored} does not match its prompt and params ({computed})")]
    DigestMismatch { stored: String, computed: String },
}

/// Key of a transcript entry: SHA-256 over the prompt text and the JSON
/// serialization of the params.
pub fn transcript_digest(prompt: &str, params: &CompletionParams) -> String {
    let params = serde_json::to_string(params).expect("params serialize");
    sha256_parts(&[prompt, &params])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub digest: String,
    pub prompt: String,
    pub params: CompletionParams,
    pub completion: String,
    /// RFC 3339 timestamp.
    pub recorded_at: String,
}

impl TranscriptEntry {
    pub fn new(prompt: &str, params: CompletionParams, completion: String) -> Self {
        TranscriptEntry {
            digest: transcript_digest(prompt, &params),
            prompt: prompt.to_string(),
            params,
            completion,
            recorded_at: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true),
        }
    }

    pub fn verify(&self) -> Result<(), CacheError> {
        let computed = transcript_digest(&self.prompt, &self.params);
        if computed != self.digest {
            return Err(CacheError::DigestMismatch {
                stored: self.digest.clone(),
                computed,
            });
        }
        Ok(())
    }
}

struct Inner {
    entries: HashMap<String, TranscriptEntry>,
    file: Option<File>,
}

/// Transcript store. Lookups are exact by digest; each digest is written
/// once. Writes are serialized internally and appended to the backing file.
pub struct TranscriptCache {
    path: Option<PathBuf>,
    inner: Mutex<Inner>,
}

impl TranscriptCache {
    pub fn in_memory() -> Self {
        TranscriptCache {
            path: None,
            inner: Mutex::new(Inner {
                entries: HashMap::new(),
                file: None,
            }),
        }
    }

    /// Opens a cache file, loading every entry. A missing file is an empty
    /// cache; it is created on the first [`record`](Self::record).
    pub fn open(path: &Path) -> Result<Self, CacheError> {
        let io_err = |source| CacheError::Io {
            path: path.to_path_buf(),
            source,
        };
        let mut entries: HashMap<String, TranscriptEntry> = HashMap::new();
        match File::open(path) {
            Ok(file) => {
                for (n, line) in BufReader::new(file).lines().enumerate() {
                    let line = line.map_err(io_err)?;
                    if line.trim().is_empty() {
                        continue;
                    }
                    let corrupt = |message: String| CacheError::Corrupt {
                        path: path.to_path_buf(),
                        line: n + 1,
                        message,
                    };
                    let entry: TranscriptEntry = serde_json::from_str(&line).map_err(|e| corrupt(e.to_string()))?;
                    entry.verify().map_err(|e| corrupt(e.to_string()))?;
                    match entries.get(&entry.digest) {
                        Some(existing) if existing.completion != entry.completion => {
                            return Err(CacheError::Conflict(entry.digest));
                        }
                        Some(_) => {}
                        None => {
                            entries.insert(entry.digest.clone(), entry);
                        }
                    }
                }
            }
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {}
            Err(e) => return Err(io_err(e)),
        }
        Ok(TranscriptCache {
            path: Some(path.to_path_buf()),
            inner: Mutex::new(Inner { entries, file: None }),
        })
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn len(&self) -> usize {
        self.inner.lock().expect("cache lock").entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn lookup(&self, digest: &str) -> Option<TranscriptEntry> {
        self.inner.lock().expect("cache lock").entries.get(digest).cloned()
    }

    /// Records `entry` once. Re-recording the same completion is a no-op; a
    /// different completion for a known digest is a conflict.
    pub fn record(&self, entry: TranscriptEntry) -> Result<(), CacheError> {
        entry.verify()?;
        let mut inner = self.inner.lock().expect("cache lock");
        if let Some(existing) = inner.entries.get(&entry.digest) {
            if existing.completion == entry.completion {
                return Ok(());
            }
            return Err(CacheError::Conflict(entry.digest));
        }
        if let Some(path) = &self.path {
            let io_err = |source| CacheError::Io {
                path: path.clone(),
                source,
            };
            if inner.file.is_none() {
                if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                    std::fs::create_dir_all(dir).map_err(io_err)?;
                }
                let file = OpenOptions::new().create(true).append(true).open(path).map_err(io_err)?;
                inner.file = Some(file);
            }
            let mut line = serde_json::to_string(&entry).expect("entry serializes");
            line.push('\n');
            let file = inner.file.as_mut().expect("file opened above");
            file.write_all(line.as_bytes()).map_err(io_err)?;
            file.flush().map_err(io_err)?;
        }
        inner.entries.insert(entry.digest.clone(), entry);
        Ok(())
    }
}
