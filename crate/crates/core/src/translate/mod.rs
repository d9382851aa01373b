//! Translation backends behind one trait.
//!
//! [`HttpTranslator`] talks to a live service, [`CachedTranslator`] memoizes
//! any backend in an append-only JSON-lines store and [`Simulator`] is a
//! deterministic offline stand-in whose degradation grows with family-tree
//! distance.

mod cache;
mod http;
mod ratelimit;
mod simulator;

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use cache::{cached_translate, CacheRecord, CachedTranslator, TranslationCache};
pub use http::{BackendConfig, HttpTranslator, RetryPolicy};
pub use ratelimit::{Clock, FakeClock, RateLimiter, SystemClock};
pub use simulator::{simulate_translate, Simulator, SimulatorParams};

#[derive(Debug, Error)]
pub enum TranslateError {
    #[error("network failure after {attempts} attempt(s): {message}")]
    Network { attempts: u32, message: String },
    #[error("authentication rejected: {0}")]
    Auth(String),
    #[error("unsupported language pair {source_lang} -> {target_lang}")]
    UnsupportedPair {
        source_lang: String,
        target_lang: String,
    },
    #[error("rate limit still exceeded after {attempts} attempt(s)")]
    RateLimited { attempts: u32 },
    #[error("unknown language `{0}`")]
    UnknownLanguage(String),
    #[error("unexpected response: {0}")]
    Protocol(String),
    #[error("backend configuration: {0}")]
    Config(String),
    #[error("cache record {line} is corrupt: {reason}")]
    CacheIntegrity { line: usize, reason: String },
    #[error("cache store: {0}")]
    Store(#[from] std::io::Error),
}

impl TranslateError {
    /// True for errors caused by the data on disk rather than the backend.
    pub fn is_integrity(&self) -> bool {
        matches!(self, TranslateError::CacheIntegrity { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TranslationRequest {
    pub text: String,
    pub source: String,
    pub target: String,
}

impl TranslationRequest {
    pub fn new(
        text: impl Into<String>,
        source: impl Into<String>,
        target: impl Into<String>,
    ) -> Self {
        TranslationRequest {
            text: text.into(),
            source: source.into(),
            target: target.into(),
        }
    }

    pub fn is_identity(&self) -> bool {
        self.source == self.target
    }
}

/// A translation service.
///
/// Implementations only see non-identity requests when called through
/// [`translate`].
pub trait Translator: Send + Sync {
    /// Stable label recorded with every run. Never contains credentials.
    fn identity(&self) -> String;

    fn translate_remote(&self, request: &TranslationRequest) -> Result<String, TranslateError>;
}

impl<T: Translator + ?Sized> Translator for Arc<T> {
    fn identity(&self) -> String {
        (**self).identity()
    }

    fn translate_remote(&self, request: &TranslationRequest) -> Result<String, TranslateError> {
        (**self).translate_remote(request)
    }
}

/// Translate through `backend`; identity requests never reach it.
pub fn translate<T: Translator + ?Sized>(
    backend: &T,
    request: &TranslationRequest,
) -> Result<String, TranslateError> {
    if request.is_identity() {
        return Ok(request.text.clone());
    }
    backend.translate_remote(request)
}

/// Counts calls that reach the wrapped backend.
pub struct CountingTranslator<T> {
    inner: T,
    calls: AtomicUsize,
}

impl<T: Translator> CountingTranslator<T> {
    pub fn new(inner: T) -> Self {
        CountingTranslator {
            inner,
            calls: AtomicUsize::new(0),
        }
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    pub fn inner(&self) -> &T {
        &self.inner
    }
}

impl<T: Translator> Translator for CountingTranslator<T> {
    fn identity(&self) -> String {
        self.inner.identity()
    }

    fn translate_remote(&self, request: &TranslationRequest) -> Result<String, TranslateError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        self.inner.translate_remote(request)
    }
}

/// Returns every text unchanged. Handy as a control backend.
#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityTranslator;

impl Translator for IdentityTranslator {
    fn identity(&self) -> String {
        "identity".into()
    }

    fn translate_remote(&self, request: &TranslationRequest) -> Result<String, TranslateError> {
        Ok(request.text.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Refuses;

    impl Translator for Refuses {
        fn identity(&self) -> String {
            "refuses".into()
        }

        fn translate_remote(&self, r: &TranslationRequest) -> Result<String, TranslateError> {
            Err(TranslateError::UnsupportedPair {
                source_lang: r.source.clone(),
                target_lang: r.target.clone(),
            })
        }
    }

    #[test]
    fn identity_requests_stay_local() {
        let backend = CountingTranslator::new(Refuses);
        let out = translate(&backend, &TranslationRequest::new("hello", "en", "en")).unwrap();
        assert_eq!(out, "hello");
        assert_eq!(backend.calls(), 0);
    }

    #[test]
    fn unsupported_pair_is_distinguishable() {
        let err = translate(&Refuses, &TranslationRequest::new("x", "en", "qq")).unwrap_err();
        assert!(matches!(err, TranslateError::UnsupportedPair { .. }));
    }
}
