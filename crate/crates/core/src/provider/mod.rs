//! Chat-completion dispatch: retries, rate limiting, usage accounting and
//! resumable batches.

mod batch;
mod http;
mod ledger;
mod limiter;
mod mock;

use std::sync::Arc;
use std::time::Duration;

use async_trait::async_trait;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use tokio::time::Instant;
use tracing::{debug, warn};

use crate::prompting::estimate_tokens;
use crate::retry::backoff_delay;

pub use batch::{run_batch, BatchError, BatchSink, BatchSummary, FailureEntry, Job, SinkVerdict};
pub use http::HttpChatProvider;
pub use ledger::{usage_totals, LedgerError, UsageLedger, UsageRecord, UsageTotals};
pub use limiter::RateLimiter;
pub use mock::{keyword_response, MockOutcome, MockProvider};

pub const DEFAULT_API_KEY_ENV: &str = "PROVIDER_API_KEY";

/// Sampling settings sent with each request and stored with each record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decoding {
    /// `None` leaves the provider default in place.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub temperature: Option<f64>,
    pub max_output_tokens: u32,
}

impl Default for Decoding {
    fn default() -> Self {
        Decoding {
            temperature: None,
            max_output_tokens: 2048,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProviderConfig {
    pub name: String,
    pub endpoint: String,
    pub model_id: String,
    pub max_attempts: u32,
    #[serde(with = "millis")]
    pub backoff_base: Duration,
    pub requests_per_minute: f64,
    pub max_concurrency: usize,
    #[serde(with = "millis")]
    pub timeout: Duration,
    pub decoding: Decoding,
    /// Name of the environment variable holding the bearer token.
    pub api_key_env: String,
}

mod millis {
    use std::time::Duration;

    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u64(d.as_millis() as u64)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        Ok(Duration::from_millis(u64::deserialize(d)?))
    }
}

impl Default for ProviderConfig {
    fn default() -> Self {
        ProviderConfig {
            name: "mock".into(),
            endpoint: String::new(),
            model_id: "mock-model".into(),
            max_attempts: 5,
            backoff_base: Duration::from_secs(2),
            requests_per_minute: 60.0,
            max_concurrency: 4,
            timeout: Duration::from_secs(300),
            decoding: Decoding::default(),
            api_key_env: DEFAULT_API_KEY_ENV.into(),
        }
    }
}

impl ProviderConfig {
    pub fn validate(&self) -> Result<(), ProviderError> {
        let bad = |m: &str| Err(ProviderError::InvalidConfig(m.to_string()));
        if self.max_attempts < 1 {
            return bad("max_attempts must be at least 1");
        }
        if self.max_concurrency < 1 {
            return bad("max_concurrency must be at least 1");
        }
        if !(self.requests_per_minute.is_finite() && self.requests_per_minute > 0.0) {
            return bad("requests_per_minute must be positive");
        }
        if self.model_id.trim().is_empty() {
            return bad("model_id is empty");
        }
        if let Some(t) = self.decoding.temperature {
            if !(t.is_finite() && t >= 0.0) {
                return bad("temperature must be a non-negative number");
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Usage {
    pub input_tokens: u64,
    pub output_tokens: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProviderResponse {
    pub raw_text: String,
    pub usage: Usage,
    #[serde(with = "millis")]
    pub latency: Duration,
    pub model_id: String,
    pub attempt_count: u32,
}

#[derive(Debug, Clone)]
pub struct ChatRequest {
    pub paper_id: Option<String>,
    pub model_id: String,
    pub system: String,
    pub user: String,
    pub decoding: Decoding,
}

/// Result of a single successful HTTP exchange.
#[derive(Debug, Clone, PartialEq)]
pub struct Completion {
    pub text: String,
    /// Provider-reported usage; estimated from text length when absent.
    pub usage: Option<Usage>,
}

/// Failure of one attempt.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum CallError {
    #[error("transient: {0}")]
    Transient(String),
    #[error("rejected with HTTP {status}: {message}")]
    Rejected { status: u16, message: String },
}

#[derive(Debug, Error)]
pub enum ProviderError {
    #[error("invalid provider config: {0}")]
    InvalidConfig(String),
    #[error("empty prompt")]
    EmptyPrompt,
    #[error("exhausted {attempts} attempts; last cause: {last_cause}")]
    ExhaustedRetries { attempts: u32, last_cause: String },
    #[error("non-retryable rejection (HTTP {status}): {message}")]
    Rejected { status: u16, message: String },
    #[error(transparent)]
    Ledger(#[from] LedgerError),
}

impl ProviderError {
    /// Short label used in failure lists.
    pub fn class(&self) -> &'static str {
        match self {
            ProviderError::InvalidConfig(_) => "invalid_config",
            ProviderError::EmptyPrompt => "empty_prompt",
            ProviderError::ExhaustedRetries { .. } => "exhausted_retries",
            ProviderError::Rejected { .. } => "rejected",
            ProviderError::Ledger(_) => "ledger",
        }
    }

    pub fn attempts(&self) -> u32 {
        match self {
            ProviderError::ExhaustedRetries { attempts, .. } => *attempts,
            ProviderError::Rejected { .. } => 1,
            _ => 0,
        }
    }
}

#[async_trait]
pub trait ChatProvider: Send + Sync {
    async fn complete(&self, request: &ChatRequest) -> Result<Completion, CallError>;
}

/// A provider bound to its configuration, rate limiter and ledger.
pub struct Client {
    provider: Arc<dyn ChatProvider>,
    config: ProviderConfig,
    limiter: RateLimiter,
    ledger: Option<Arc<UsageLedger>>,
}

impl Client {
    pub fn new(provider: Arc<dyn ChatProvider>, config: ProviderConfig) -> Result<Self, ProviderError> {
        config.validate()?;
        let limiter = RateLimiter::new(config.requests_per_minute);
        Ok(Client {
            provider,
            config,
            limiter,
            ledger: None,
        })
    }

    pub fn with_ledger(mut self, ledger: Arc<UsageLedger>) -> Self {
        self.ledger = Some(ledger);
        self
    }

    pub fn config(&self) -> &ProviderConfig {
        &self.config
    }

    pub fn ledger(&self) -> Option<&Arc<UsageLedger>> {
        self.ledger.as_ref()
    }

    /// First successful completion, retrying transient failures with
    /// exponential backoff. Every attempt passes through the rate limiter.
    pub async fn submit_one(
        &self,
        paper_id: Option<&str>,
        system: &str,
        user: &str,
    ) -> Result<ProviderResponse, ProviderError> {
        if system.trim().is_empty() && user.trim().is_empty() {
            return Err(ProviderError::EmptyPrompt);
        }
        let request = ChatRequest {
            paper_id: paper_id.map(String::from),
            model_id: self.config.model_id.clone(),
            system: system.to_string(),
            user: user.to_string(),
            decoding: self.config.decoding.clone(),
        };
        let started = Instant::now();
        let mut attempt = 0;
        loop {
            attempt += 1;
            self.limiter.acquire().await;
            let outcome = match tokio::time::timeout(self.config.timeout, self.provider.complete(&request)).await {
                Ok(r) => r,
                Err(_) => Err(CallError::Transient(format!(
                    "timed out after {:?}",
                    self.config.timeout
                ))),
            };
            match outcome {
                Ok(completion) => {
                    let usage = completion.usage.unwrap_or(Usage {
                        input_tokens: (estimate_tokens(system) + estimate_tokens(user)) as u64,
                        output_tokens: estimate_tokens(&completion.text) as u64,
                    });
                    if let Some(ledger) = &self.ledger {
                        ledger.record(UsageRecord::now(paper_id, &self.config.model_id, usage))?;
                    }
                    debug!(paper_id, attempt, "completion received");
                    return Ok(ProviderResponse {
                        raw_text: completion.text,
                        usage,
                        latency: started.elapsed(),
                        model_id: self.config.model_id.clone(),
                        attempt_count: attempt,
                    });
                }
                Err(CallError::Rejected { status, message }) => {
                    return Err(ProviderError::Rejected { status, message });
                }
                Err(CallError::Transient(cause)) => {
                    if attempt >= self.config.max_attempts {
                        return Err(ProviderError::ExhaustedRetries {
                            attempts: attempt,
                            last_cause: cause,
                        });
                    }
                    let delay = backoff_delay(self.config.backoff_base, attempt);
                    warn!(paper_id, attempt, %cause, ?delay, "transient provider failure");
                    tokio::time::sleep(delay).await;
                }
            }
        }
    }
}
