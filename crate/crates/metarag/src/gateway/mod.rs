//! Uniform access to chat, embedding and rerank providers.
//!
//! The [`Gateway`] owns retries, the global in-flight ceiling, per-role model
//! selection, embedding batching, structured-output parsing with one repair
//! round, and latency accounting. Providers only speak their wire protocol.

pub mod mock;
pub mod openai;
pub mod structured;

use std::collections::BTreeMap;
use std::fmt;
use std::sync::{Arc, Condvar, Mutex};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::prompts::Prompt;
pub use structured::{FieldKind, Schema, StructuredRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Generator,
    PipelineHelper,
    Enricher,
    Judge,
    Embedder,
    Reranker,
}

impl Role {
    pub const ALL: [Role; 6] = [
        Role::Generator,
        Role::PipelineHelper,
        Role::Enricher,
        Role::Judge,
        Role::Embedder,
        Role::Reranker,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Role::Generator => "generator",
            Role::PipelineHelper => "pipeline_helper",
            Role::Enricher => "enricher",
            Role::Judge => "judge",
            Role::Embedder => "embedder",
            Role::Reranker => "reranker",
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProviderKind {
    OpenaiCompatible,
    Mock,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub backoff_base: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_attempts: 3,
            backoff_base: Duration::from_millis(500),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProviderConfig {
    pub kind: ProviderKind,
    pub base_url: String,
    /// Reranking endpoint base; defaults to `base_url`.
    pub rerank_base_url: Option<String>,
    /// Name of the environment variable holding the API key. The key itself
    /// is never stored or logged.
    pub api_key_env: String,
    pub models: BTreeMap<Role, String>,
    pub timeout: Duration,
    pub max_parallel: usize,
    pub retry: RetryPolicy,
    pub embed_batch: usize,
}

impl ProviderConfig {
    /// Mock provider with every role configured and no retry backoff.
    pub fn mock() -> Self {
        Self {
            kind: ProviderKind::Mock,
            base_url: "mock://".into(),
            rerank_base_url: None,
            api_key_env: "LLM_API_KEY".into(),
            models: Role::ALL.iter().map(|&r| (r, format!("mock-{r}"))).collect(),
            timeout: Duration::from_secs(30),
            max_parallel: 8,
            retry: RetryPolicy {
                max_attempts: 2,
                backoff_base: Duration::ZERO,
            },
            embed_batch: 64,
        }
    }

    pub fn openai_compatible(base_url: impl Into<String>) -> Self {
        let models = [
            (Role::Generator, "o4-mini"),
            (Role::PipelineHelper, "gpt-4.1-mini"),
            (Role::Enricher, "gpt-4.1-mini"),
            (Role::Judge, "gpt-4.1-mini"),
            (Role::Embedder, "text-embedding-3-large"),
            (Role::Reranker, "rerank-v3.5"),
        ];
        Self {
            kind: ProviderKind::OpenaiCompatible,
            base_url: base_url.into(),
            rerank_base_url: None,
            api_key_env: "LLM_API_KEY".into(),
            models: models.iter().map(|&(r, m)| (r, m.to_string())).collect(),
            timeout: Duration::from_secs(120),
            max_parallel: 8,
            retry: RetryPolicy::default(),
            embed_batch: 64,
        }
    }

    pub fn validate(&self) -> Result<(), GatewayError> {
        if self.max_parallel == 0 {
            return Err(GatewayError::Config("max_parallel must be >= 1".into()));
        }
        if self.retry.max_attempts == 0 {
            return Err(GatewayError::Config("retry.max_attempts must be >= 1".into()));
        }
        if self.embed_batch == 0 {
            return Err(GatewayError::Config("embed_batch must be >= 1".into()));
        }
        Ok(())
    }
}

/// Failure reported by a provider for a single attempt.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ProviderError {
    #[error("transport: {0}")]
    Transport(String),
    #[error("http status {status}: {body}")]
    Status { status: u16, body: String },
    #[error("malformed response: {0}")]
    Malformed(String),
}

impl ProviderError {
    fn is_transient(&self) -> bool {
        match self {
            ProviderError::Transport(_) => true,
            ProviderError::Status { status, .. } => *status == 429 || *status >= 500,
            ProviderError::Malformed(_) => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GatewayError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("invalid input: {0}")]
    Input(String),
    #[error("{role}: transport failure after {attempts} attempt(s): {message}")]
    Transport { role: Role, attempts: u32, message: String },
    #[error("{role}: http status {status}: {body}")]
    Status { role: Role, status: u16, body: String },
    #[error("{role}: malformed response: {message}")]
    Malformed { role: Role, message: String },
    #[error("{task}: structured output invalid after repair: {message}")]
    StructuredOutput { task: String, message: String },
}

/// One chat turn. `task` names the prompt asset and `vars` carries the
/// placeholder values it was rendered from; real providers only read the
/// rendered text.
#[derive(Debug, Clone, Copy)]
pub struct ChatRequest<'a> {
    pub role: Role,
    pub model: &'a str,
    pub task: &'a str,
    pub system: &'a str,
    pub user: &'a str,
    pub vars: &'a BTreeMap<String, String>,
    /// 0 for the first request, 1 for the structured-output repair.
    pub repair_round: u8,
}

pub trait Provider: Send + Sync {
    fn chat(&self, req: &ChatRequest<'_>) -> Result<String, ProviderError>;
    fn embed(&self, model: &str, texts: &[String]) -> Result<Vec<Vec<f32>>, ProviderError>;
    /// `(index, relevance)` pairs, best first, at most `top_n`.
    fn rerank(
        &self,
        model: &str,
        query: &str,
        documents: &[String],
        top_n: usize,
    ) -> Result<Vec<(usize, f64)>, ProviderError>;
    /// Time source used for latency accounting of calls to this provider.
    fn clock(&self) -> Arc<dyn Clock> {
        Arc::new(WallClock::new())
    }
}

/// Monotonic time since an arbitrary origin.
pub trait Clock: Send + Sync {
    fn now(&self) -> Duration;
}

pub struct WallClock(Instant);

impl WallClock {
    pub fn new() -> Self {
        Self(Instant::now())
    }
}

impl Default for WallClock {
    fn default() -> Self {
        Self::new()
    }
}

impl Clock for WallClock {
    fn now(&self) -> Duration {
        self.0.elapsed()
    }
}

thread_local! {
    static VIRTUAL_NOW: std::cell::Cell<Duration> = const { std::cell::Cell::new(Duration::ZERO) };
}

/// Per-thread simulated time, advanced only by simulated provider calls.
/// Latencies measured on one thread are reproducible across runs.
#[derive(Debug, Default, Clone, Copy)]
pub struct VirtualClock;

impl VirtualClock {
    pub fn advance(by: Duration) {
        VIRTUAL_NOW.with(|c| c.set(c.get() + by));
    }
}

impl Clock for VirtualClock {
    fn now(&self) -> Duration {
        VIRTUAL_NOW.with(|c| c.get())
    }
}

/// Counting semaphore bounding concurrent provider calls.
struct Ceiling {
    limit: usize,
    inflight: Mutex<usize>,
    freed: Condvar,
}

struct Permit<'a>(&'a Ceiling);

impl Ceiling {
    fn acquire(&self) -> Permit<'_> {
        let mut n = self.inflight.lock().unwrap();
        while *n >= self.limit {
            n = self.freed.wait(n).unwrap();
        }
        *n += 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.inflight.lock().unwrap() -= 1;
        self.0.freed.notify_one();
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct RoleLatency {
    pub calls: u64,
    pub total_seconds: f64,
}

pub struct Gateway {
    provider: Arc<dyn Provider>,
    config: ProviderConfig,
    clock: Arc<dyn Clock>,
    ceiling: Ceiling,
    latency: Mutex<BTreeMap<Role, RoleLatency>>,
}

impl fmt::Debug for Gateway {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Gateway")
            .field("kind", &self.config.kind)
            .finish_non_exhaustive()
    }
}

impl Gateway {
    pub fn new(provider: Arc<dyn Provider>, config: ProviderConfig) -> Result<Self, GatewayError> {
        config.validate()?;
        Ok(Self {
            clock: provider.clock(),
            ceiling: Ceiling {
                limit: config.max_parallel,
                inflight: Mutex::new(0),
                freed: Condvar::new(),
            },
            provider,
            config,
            latency: Mutex::new(BTreeMap::new()),
        })
    }

    /// Builds the provider named by `config.kind`.
    pub fn from_config(config: ProviderConfig) -> Result<Self, GatewayError> {
        let provider: Arc<dyn Provider> = match config.kind {
            ProviderKind::Mock => Arc::new(mock::MockProvider::new()),
            ProviderKind::OpenaiCompatible => Arc::new(openai::OpenAiCompatible::from_config(&config)?),
        };
        Self::new(provider, config)
    }

    pub fn mock() -> Self {
        Self::from_config(ProviderConfig::mock()).expect("mock config is valid")
    }

    pub fn config(&self) -> &ProviderConfig {
        &self.config
    }

    pub fn clock(&self) -> &dyn Clock {
        self.clock.as_ref()
    }

    pub fn model(&self, role: Role) -> Result<&str, GatewayError> {
        self.config
            .models
            .get(&role)
            .map(String::as_str)
            .ok_or_else(|| GatewayError::Config(format!("no model configured for role {role}")))
    }

    /// Accumulated call counts and latency per role.
    pub fn latency_stats(&self) -> BTreeMap<Role, RoleLatency> {
        self.latency.lock().unwrap().clone()
    }

    fn record(&self, role: Role, elapsed: Duration) {
        let mut stats = self.latency.lock().unwrap();
        let entry = stats.entry(role).or_default();
        entry.calls += 1;
        entry.total_seconds += elapsed.as_secs_f64();
    }

    /// Runs `call` with retries on transient failures, holding an in-flight
    /// permit only while the provider is busy.
    fn with_retries<T>(
        &self,
        role: Role,
        mut call: impl FnMut(&dyn Provider) -> Result<T, ProviderError>,
    ) -> Result<T, GatewayError> {
        let started = self.clock.now();
        let max = self.config.retry.max_attempts;
        let mut attempt = 0;
        let result = loop {
            attempt += 1;
            let outcome = {
                let _permit = self.ceiling.acquire();
                call(self.provider.as_ref())
            };
            match outcome {
                Ok(v) => break Ok(v),
                Err(e) if e.is_transient() && attempt < max => {
                    log::warn!("{role}: attempt {attempt}/{max} failed: {e}");
                    let backoff = self.config.retry.backoff_base * 2u32.saturating_pow(attempt - 1);
                    if !backoff.is_zero() {
                        std::thread::sleep(backoff);
                    }
                }
                Err(ProviderError::Transport(message)) => {
                    break Err(GatewayError::Transport {
                        role,
                        attempts: attempt,
                        message,
                    })
                }
                Err(ProviderError::Status { status, body }) => break Err(GatewayError::Status { role, status, body }),
                Err(ProviderError::Malformed(message)) => break Err(GatewayError::Malformed { role, message }),
            }
        };
        self.record(role, self.clock.now().saturating_sub(started));
        result
    }

    /// Free-text chat completion for a rendered prompt.
    pub fn chat(&self, role: Role, prompt: &Prompt) -> Result<String, GatewayError> {
        self.chat_round(role, prompt, 0)
    }

    fn chat_round(&self, role: Role, prompt: &Prompt, repair_round: u8) -> Result<String, GatewayError> {
        let model = self.model(role)?.to_string();
        self.with_retries(role, |p| {
            p.chat(&ChatRequest {
                role,
                model: &model,
                task: prompt.task,
                system: &prompt.system,
                user: &prompt.user,
                vars: &prompt.vars,
                repair_round,
            })
        })
    }

    /// Chat expecting a JSON object matching `schema`. A parse or validation
    /// failure triggers exactly one repair request quoting the error.
    pub fn chat_structured(
        &self,
        role: Role,
        prompt: &Prompt,
        schema: &Schema,
    ) -> Result<StructuredRecord, GatewayError> {
        if schema.is_empty() {
            return Err(GatewayError::Input("structured output schema is empty".into()));
        }
        let first = self.chat(role, prompt)?;
        let error = match schema.parse(&first) {
            Ok(record) => return Ok(record),
            Err(e) => e,
        };
        log::warn!(
            "{}: structured output rejected ({error}); requesting repair",
            prompt.task
        );
        let repair = prompt.repair(&first, &error.to_string(), schema);
        let second = self.chat_round(role, &repair, 1)?;
        schema.parse(&second).map_err(|e| GatewayError::StructuredOutput {
            task: prompt.task.to_string(),
            message: e.to_string(),
        })
    }

    /// Embeds `texts` in provider-sized batches, preserving order.
    pub fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f32>>, GatewayError> {
        if texts.is_empty() {
            return Err(GatewayError::Input("nothing to embed".into()));
        }
        if let Some(i) = texts.iter().position(|t| t.trim().is_empty()) {
            return Err(GatewayError::Input(format!("text {i} is empty")));
        }
        let model = self.model(Role::Embedder)?.to_string();
        let mut out = Vec::with_capacity(texts.len());
        for batch in texts.chunks(self.config.embed_batch) {
            let vectors = self.with_retries(Role::Embedder, |p| p.embed(&model, batch))?;
            if vectors.len() != batch.len() {
                return Err(GatewayError::Malformed {
                    role: Role::Embedder,
                    message: format!("expected {} vectors, got {}", batch.len(), vectors.len()),
                });
            }
            out.extend(vectors);
        }
        let dim = out[0].len();
        if dim == 0 || out.iter().any(|v| v.len() != dim) {
            return Err(GatewayError::Malformed {
                role: Role::Embedder,
                message: "inconsistent embedding dimensions".into(),
            });
        }
        Ok(out)
    }

    /// Relevance-ordered `(index, score)` pairs for `documents`.
    pub fn rerank_external(
        &self,
        query: &str,
        documents: &[String],
        top_n: usize,
    ) -> Result<Vec<(usize, f64)>, GatewayError> {
        if top_n == 0 || top_n > documents.len() {
            return Err(GatewayError::Input(format!(
                "top_n {top_n} out of range for {} documents",
                documents.len()
            )));
        }
        let model = self.model(Role::Reranker)?.to_string();
        let ranked = self.with_retries(Role::Reranker, |p| p.rerank(&model, query, documents, top_n))?;
        if ranked.iter().any(|&(i, _)| i >= documents.len()) {
            return Err(GatewayError::Malformed {
                role: Role::Reranker,
                message: "rerank index out of range".into(),
            });
        }
        Ok(ranked.into_iter().take(top_n).collect())
    }
}
