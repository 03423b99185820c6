//! Completion backends.
//!
//! Every backend answers a rendered [`Prompt`] under [`CompletionParams`]:
//!
//! * [`LiveBackend`] posts to a completions-style HTTP endpoint,
//! * [`CachedBackend`] serves recorded completions from a [`TranscriptCache`]
//!   and optionally falls through to another backend, recording its answers,
//! * [`OracleBackend`] answers from gold annotations.

mod cache;
mod live;
mod oracle;
mod params;

use std::sync::Arc;

use thiserror::Error;

use crate::prompting::{Prompt, QuestionKind};

pub use cache::{transcript_digest, CacheError, TranscriptCache, TranscriptEntry};
pub use live::{truncate_at_stop, LiveBackend, LiveConfig, API_KEY_ENV};
pub use oracle::OracleBackend;
pub use params::{CompletionParams, QuestionParams};

#[derive(Debug, Error)]
pub enum BackendError {
    #[error("transcript cache miss for {question} prompt of document {doc_id} (digest {digest})")]
    CacheMiss {
        digest: String,
        doc_id: String,
        question: QuestionKind,
    },
    #[error(transparent)]
    Cache(#[from] CacheError),
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("completion endpoint returned status {0}")]
    Status(u16),
    #[error("rate limited after {attempts} attempts")]
    RateLimited { attempts: u32 },
    #[error("unexpected completion response: {0}")]
    BadResponse(String),
    #[error("environment variable {0} is not set")]
    MissingCredentials(&'static str),
    #[error("document {0} has no gold standard")]
    UnknownDocument(String),
    #[error("invalid completion parameters: {0}")]
    InvalidParams(String),
    #[error("empty prompt")]
    EmptyPrompt,
}

/// A completion model. Implementations are safe to call concurrently.
pub trait Backend: Send + Sync {
    fn complete(&self, prompt: &Prompt, params: &CompletionParams) -> Result<String, BackendError>;
}

impl<B: Backend + ?Sized> Backend for Arc<B> {
    fn complete(&self, prompt: &Prompt, params: &CompletionParams) -> Result<String, BackendError> {
        (**self).complete(prompt, params)
    }
}

impl<B: Backend + ?Sized> Backend for Box<B> {
    fn complete(&self, prompt: &Prompt, params: &CompletionParams) -> Result<String, BackendError> {
        (**self).complete(prompt, params)
    }
}

/// Serves completions from a transcript cache.
///
/// On a miss the request goes to `fallback` when one is configured and the
/// answer is recorded; without a fallback a miss is an error.
pub struct CachedBackend {
    cache: Arc<TranscriptCache>,
    fallback: Option<Box<dyn Backend>>,
}

impl CachedBackend {
    /// Strict replay: misses fail.
    pub fn replay(cache: Arc<TranscriptCache>) -> Self {
        CachedBackend { cache, fallback: None }
    }

    /// Write-through: misses are answered by `fallback` and recorded.
    pub fn recording(cache: Arc<TranscriptCache>, fallback: Box<dyn Backend>) -> Self {
        CachedBackend {
            cache,
            fallback: Some(fallback),
        }
    }

    pub fn cache(&self) -> &TranscriptCache {
        &self.cache
    }
}

impl Backend for CachedBackend {
    fn complete(&self, prompt: &Prompt, params: &CompletionParams) -> Result<String, BackendError> {
        let digest = transcript_digest(&prompt.text, params);
        if let Some(entry) = self.cache.lookup(&digest) {
            return Ok(entry.completion);
        }
        let Some(fallback) = &self.fallback else {
            return Err(BackendError::CacheMiss {
                digest,
                doc_id: prompt.doc_id.clone(),
                question: prompt.question,
            });
        };
        let completion = fallback.complete(prompt, params)?;
        self.cache
            .record(TranscriptEntry::new(&prompt.text, params.clone(), completion.clone()))?;
        Ok(completion)
    }
}
