//! TOML configuration for providers and benchmark pipelines.
//!
//! ```toml
//! [provider]
//! kind = "openai-compatible"      # or "mock"
//! base_url = "http://localhost:8000/v1"
//! api_key_env = "LLM_API_KEY"
//! timeout_secs = 120
//! max_parallel = 8
//!
//! [provider.models]
//! generator = "o4-mini"
//!
//! [provider.retry]
//! max_attempts = 3
//! backoff_base_ms = 500
//!
//! [hybrid]
//! lambda = 0.5
//! candidate_pool = 25
//!
//! [pipeline.1]
//! architecture = 3
//! collection = "ctx"
//! reranker = "metadata"
//! ```
//!
//! Pipelines run in ascending numeric order of their table keys.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Duration;

use metarag_core::rerank::RerankWeights;
use metarag_core::Collection;
use serde::Deserialize;

use crate::gateway::{ProviderConfig, ProviderKind, Role};
use crate::pipeline::{PipelineConfig, RerankerKind};
use crate::{Error, Result};

pub const BASE_URL_ENV: &str = "LLM_BASE_URL";
const DEFAULT_BASE_URL: &str = "https://api.openai.com/v1";

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRetry {
    max_attempts: Option<u32>,
    backoff_base_ms: Option<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProvider {
    kind: Option<ProviderKind>,
    base_url: Option<String>,
    rerank_base_url: Option<String>,
    api_key_env: Option<String>,
    timeout_secs: Option<f64>,
    max_parallel: Option<usize>,
    embed_batch: Option<usize>,
    #[serde(default)]
    models: BTreeMap<Role, String>,
    #[serde(default)]
    retry: RawRetry,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawHybrid {
    lambda: Option<f64>,
    candidate_pool: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPipeline {
    architecture: u8,
    collection: String,
    k: Option<usize>,
    reranker: Option<RerankerKind>,
    lambda: Option<f64>,
    candidate_pool: Option<usize>,
    bm25_k1: Option<f64>,
    bm25_b: Option<f64>,
    /// entity_freq, cluster_coherence, entity_query, retrieval
    weights: Option<[f64; 4]>,
    initial_k: Option<usize>,
    expand_k: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    provider: Option<RawProvider>,
    #[serde(default)]
    hybrid: RawHybrid,
    #[serde(default)]
    pipeline: BTreeMap<String, RawPipeline>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub provider: ProviderConfig,
    pub pipelines: Vec<PipelineConfig>,
}

pub fn parse_collection(s: &str) -> Result<Collection> {
    match s.to_ascii_lowercase().as_str() {
        "std" | "standard" => Ok(Collection::Standard),
        "ctx" | "contextual" => Ok(Collection::Contextual),
        other => Err(Error::Config(format!(
            "unknown collection `{other}` (expected std or ctx)"
        ))),
    }
}

fn provider_config(raw: Option<RawProvider>, kind_override: Option<ProviderKind>) -> ProviderConfig {
    let raw = raw.unwrap_or_default();
    let kind = kind_override.or(raw.kind).unwrap_or(ProviderKind::Mock);
    let mut cfg = match kind {
        ProviderKind::Mock => ProviderConfig::mock(),
        ProviderKind::OpenaiCompatible => {
            let base = raw
                .base_url
                .clone()
                .or_else(|| std::env::var(BASE_URL_ENV).ok().filter(|s| !s.is_empty()))
                .unwrap_or_else(|| DEFAULT_BASE_URL.to_string());
            ProviderConfig::openai_compatible(base)
        }
    };
    if kind == ProviderKind::Mock {
        if let Some(b) = raw.base_url {
            cfg.base_url = b;
        }
    }
    cfg.rerank_base_url = raw.rerank_base_url.or(cfg.rerank_base_url);
    if let Some(v) = raw.api_key_env {
        cfg.api_key_env = v;
    }
    if let Some(t) = raw.timeout_secs {
        cfg.timeout = Duration::from_secs_f64(t.max(0.0));
    }
    if let Some(n) = raw.max_parallel {
        cfg.max_parallel = n;
    }
    if let Some(n) = raw.embed_batch {
        cfg.embed_batch = n;
    }
    if let Some(n) = raw.retry.max_attempts {
        cfg.retry.max_attempts = n;
    }
    if let Some(ms) = raw.retry.backoff_base_ms {
        cfg.retry.backoff_base = Duration::from_millis(ms);
    }
    cfg.models.extend(raw.models);
    cfg
}

/// Parses a configuration document. `kind_override` replaces the provider
/// kind named in the file.
pub fn parse(text: &str, kind_override: Option<ProviderKind>) -> Result<Config> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    let provider = provider_config(raw.provider, kind_override);
    provider.validate()?;

    let mut keyed = Vec::with_capacity(raw.pipeline.len());
    for (key, p) in raw.pipeline {
        let n: u64 = key
            .parse()
            .map_err(|_| Error::Config(format!("pipeline key `{key}` is not a number")))?;
        keyed.push((n, key, p));
    }
    keyed.sort_by_key(|(n, _, _)| *n);

    let mut pipelines = Vec::with_capacity(keyed.len());
    for (_, key, p) in keyed {
        let mut cfg = PipelineConfig::new(p.architecture, parse_collection(&p.collection)?);
        if let Some(l) = raw.hybrid.lambda {
            cfg.hybrid.lambda = l;
        }
        if let Some(c) = raw.hybrid.candidate_pool {
            cfg.hybrid.candidate_pool = c;
        }
        if let Some(l) = p.lambda {
            cfg.hybrid.lambda = l;
        }
        if let Some(c) = p.candidate_pool {
            cfg.hybrid.candidate_pool = c;
        }
        if let Some(k) = p.k {
            cfg.k = k;
        }
        if let Some(r) = p.reranker {
            cfg.reranker = r;
        }
        if let Some(k1) = p.bm25_k1 {
            cfg.bm25.k1 = k1;
        }
        if let Some(b) = p.bm25_b {
            cfg.bm25.b = b;
        }
        if let Some([a, b, c, d]) = p.weights {
            cfg.rerank_weights =
                RerankWeights::new(a, b, c, d).map_err(|e| Error::Config(format!("pipeline.{key}: {e}")))?;
        }
        if let Some(i) = p.initial_k {
            cfg.expansion.initial_k = i;
        }
        if let Some(e) = p.expand_k {
            cfg.expansion.expand_k = e;
        }
        cfg.validate()
            .map_err(|e| Error::Config(format!("pipeline.{key}: {e}")))?;
        pipelines.push(cfg);
    }
    Ok(Config { provider, pipelines })
}

pub fn load(path: &Path, kind_override: Option<ProviderKind>) -> Result<Config> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse(&text, kind_override).map_err(|e| Error::format(path, e))
}
