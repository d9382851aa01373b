use std::sync::Arc;
use std::time::Duration;

use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::ratelimit::{Clock, RateLimiter, SystemClock};
use super::{TranslateError, TranslationRequest, Translator};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    /// First backoff delay; doubles on every retry, plus up to 50% jitter.
    pub backoff_base_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_attempts: 5,
            backoff_base_ms: 500,
        }
    }
}

/// Settings for a live translation service speaking the Google Cloud
/// Translation v2 JSON protocol.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BackendConfig {
    pub endpoint: String,
    /// Name of the environment variable holding the API key.
    pub credential_env: Option<String>,
    /// Label recorded in run records in place of the endpoint.
    pub identity: String,
    pub rate_limit: f64,
    pub retry: RetryPolicy,
    pub timeout_secs: f64,
}

impl Default for BackendConfig {
    fn default() -> Self {
        BackendConfig {
            endpoint: "https://translation.googleapis.com/language/translate/v2".into(),
            credential_env: Some("GOOGLE_TRANSLATE_API_KEY".into()),
            identity: "google-translate-v2".into(),
            rate_limit: 5.0,
            retry: RetryPolicy::default(),
            timeout_secs: 30.0,
        }
    }
}

impl BackendConfig {
    pub fn validate(&self) -> Result<(), TranslateError> {
        if !(self.rate_limit.is_finite() && self.rate_limit > 0.0) {
            return Err(TranslateError::Config("rate_limit must be > 0".into()));
        }
        if self.retry.max_attempts < 1 {
            return Err(TranslateError::Config("max_attempts must be >= 1".into()));
        }
        if !(self.timeout_secs.is_finite() && self.timeout_secs > 0.0) {
            return Err(TranslateError::Config("timeout_secs must be > 0".into()));
        }
        if !(self.endpoint.starts_with("https://") || self.endpoint.starts_with("http://")) {
            return Err(TranslateError::Config(format!(
                "endpoint `{}` is not an http(s) URL",
                self.endpoint
            )));
        }
        Ok(())
    }
}

enum Failure {
    /// Worth retrying: transport errors, timeouts, 5xx.
    Transient(String),
    Throttled,
    Fatal(TranslateError),
}

#[derive(Deserialize)]
struct V2Response {
    data: V2Data,
}

#[derive(Deserialize)]
struct V2Data {
    translations: Vec<V2Translation>,
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct V2Translation {
    translated_text: String,
}

pub struct HttpTranslator {
    config: BackendConfig,
    api_key: Option<String>,
    client: reqwest::blocking::Client,
    limiter: Arc<RateLimiter>,
}

impl HttpTranslator {
    /// Validate the config and resolve the credential before any request.
    pub fn new(config: BackendConfig) -> Result<Self, TranslateError> {
        let clock: Arc<dyn Clock> = Arc::new(SystemClock::default());
        let limiter = Arc::new(RateLimiter::new(config.rate_limit, clock)?);
        Self::with_limiter(config, limiter)
    }

    /// Share `limiter` with other backends hitting the same service.
    pub fn with_limiter(
        config: BackendConfig,
        limiter: Arc<RateLimiter>,
    ) -> Result<Self, TranslateError> {
        config.validate()?;
        let api_key = match &config.credential_env {
            Some(var) => match std::env::var(var) {
                Ok(v) if !v.is_empty() => Some(v),
                _ => {
                    return Err(TranslateError::Config(format!(
                        "credential environment variable `{var}` is not set"
                    )))
                }
            },
            None => None,
        };
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs_f64(config.timeout_secs))
            .build()
            .map_err(|e| TranslateError::Config(e.to_string()))?;
        Ok(HttpTranslator {
            config,
            api_key,
            client,
            limiter,
        })
    }

    pub fn limiter(&self) -> &Arc<RateLimiter> {
        &self.limiter
    }

    fn attempt(&self, request: &TranslationRequest) -> Result<String, Failure> {
        self.limiter.acquire();
        let mut call = self.client.post(&self.config.endpoint).json(&json!({
            "q": request.text,
            "source": request.source,
            "target": request.target,
            "format": "text",
        }));
        if let Some(key) = &self.api_key {
            call = call.query(&[("key", key)]);
        }
        let response = call.send().map_err(|e| Failure::Transient(e.to_string()))?;
        let status = response.status();
        let body = response
            .text()
            .map_err(|e| Failure::Transient(e.to_string()))?;
        match status.as_u16() {
            200..=299 => {
                let parsed: V2Response = serde_json::from_str(&body)
                    .map_err(|e| Failure::Fatal(TranslateError::Protocol(e.to_string())))?;
                parsed
                    .data
                    .translations
                    .into_iter()
                    .next()
                    .map(|t| t.translated_text)
                    .ok_or_else(|| {
                        Failure::Fatal(TranslateError::Protocol("empty translations list".into()))
                    })
            }
            429 => Err(Failure::Throttled),
            401 | 403 => Err(Failure::Fatal(TranslateError::Auth(format!(
                "HTTP {status}"
            )))),
            400 if body.to_lowercase().contains("language") => {
                Err(Failure::Fatal(TranslateError::UnsupportedPair {
                    source_lang: request.source.clone(),
                    target_lang: request.target.clone(),
                }))
            }
            500..=599 => Err(Failure::Transient(format!("HTTP {status}"))),
            _ => Err(Failure::Fatal(TranslateError::Protocol(format!(
                "HTTP {status}: {}",
                body.chars().take(200).collect::<String>()
            )))),
        }
    }

    fn backoff(&self, attempt: u32) -> Duration {
        let base = self.config.retry.backoff_base_ms as f64 * 2f64.powi(attempt as i32 - 1);
        let jitter = 1.0 + rand::thread_rng().gen_range(0.0..0.5);
        Duration::from_secs_f64(base * jitter / 1000.0)
    }
}

impl Translator for HttpTranslator {
    fn identity(&self) -> String {
        self.config.identity.clone()
    }

    fn translate_remote(&self, request: &TranslationRequest) -> Result<String, TranslateError> {
        let max = self.config.retry.max_attempts;
        let mut attempt = 1;
        loop {
            let failure = match self.attempt(request) {
                Ok(text) => return Ok(text),
                Err(Failure::Fatal(e)) => return Err(e),
                Err(f) => f,
            };
            if attempt >= max {
                return Err(match failure {
                    Failure::Throttled => TranslateError::RateLimited { attempts: attempt },
                    Failure::Transient(message) => TranslateError::Network {
                        attempts: attempt,
                        message,
                    },
                    Failure::Fatal(e) => e,
                });
            }
            self.limiter.clock().sleep(self.backoff(attempt));
            attempt += 1;
        }
    }
}
