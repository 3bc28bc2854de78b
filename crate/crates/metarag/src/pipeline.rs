//! Online answering: the six retrieval architectures followed by one
//! generator call.
//!
//! | arch | path |
//! |------|------|
//! | 1 | dense search, `k` |
//! | 2 | hybrid search, `k` |
//! | 3 | hybrid search, `candidate_pool` → reranker → `k` |
//! | 4 | file filter → query rewrite → arch 3 restricted to the selected files |
//! | 5 | hybrid search, `candidate_pool` → metadata reranker → `k` |
//! | 6 | arch 4 to `initial_k` → metadata expansion of `expand_k` more |
//!
//! Pre-retrieval helpers fail open. Generation fails closed.

use std::collections::{BTreeMap, BTreeSet};
use std::time::Duration;

use metarag_core::expansion::{concept_matches, core_concepts, expand};
use metarag_core::hybrid::{search_hybrid, HybridParams};
use metarag_core::lexical::Bm25Params;
use metarag_core::model::renumber;
use metarag_core::rerank::{metadata_rerank, RerankWeights};
use metarag_core::{Chunk, Collection, MetadataFilter, ScoredChunk};
use serde::{Deserialize, Serialize};

use crate::gateway::{FieldKind, Gateway, Role, Schema};
use crate::prompts::{task, Prompt};
use crate::store::Index;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RerankerKind {
    None,
    External,
    Metadata,
}

impl RerankerKind {
    pub fn as_str(self) -> &'static str {
        match self {
            RerankerKind::None => "none",
            RerankerKind::External => "external",
            RerankerKind::Metadata => "metadata",
        }
    }

    pub fn default_for(architecture: u8) -> Self {
        match architecture {
            1 | 2 => RerankerKind::None,
            5 => RerankerKind::Metadata,
            _ => RerankerKind::External,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExpansionParams {
    pub initial_k: usize,
    pub expand_k: usize,
}

impl Default for ExpansionParams {
    fn default() -> Self {
        Self {
            initial_k: 4,
            expand_k: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub architecture: u8,
    pub collection: Collection,
    pub k: usize,
    pub hybrid: HybridParams,
    pub bm25: Bm25Params,
    pub reranker: RerankerKind,
    pub rerank_weights: RerankWeights,
    pub expansion: ExpansionParams,
}

impl PipelineConfig {
    /// Defaults: `k = 7`, 25 candidates, λ = 0.5 and the architecture's
    /// usual reranker.
    pub fn new(architecture: u8, collection: Collection) -> Self {
        Self {
            architecture,
            collection,
            k: 7,
            hybrid: HybridParams::default(),
            bm25: Bm25Params::default(),
            reranker: RerankerKind::default_for(architecture),
            rerank_weights: RerankWeights::default(),
            expansion: ExpansionParams::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if !(1..=6).contains(&self.architecture) {
            return fail(format!("architecture must be 1-6, got {}", self.architecture));
        }
        if self.k == 0 {
            return fail("k must be positive".into());
        }
        if self.k > self.hybrid.candidate_pool {
            return fail(format!(
                "k ({}) must not exceed the candidate pool ({})",
                self.k, self.hybrid.candidate_pool
            ));
        }
        self.hybrid.validate()?;
        self.bm25.validate()?;
        self.rerank_weights.validate()?;
        let ok = match self.architecture {
            1 | 2 => self.reranker == RerankerKind::None,
            5 => self.reranker == RerankerKind::Metadata,
            _ => true,
        };
        if !ok {
            return fail(format!(
                "architecture {} does not support reranker `{}`",
                self.architecture,
                self.reranker.as_str()
            ));
        }
        if self.architecture == 6 {
            let e = self.expansion;
            if e.initial_k == 0 || e.expand_k == 0 {
                return fail("expansion initial_k and expand_k must be positive".into());
            }
            if e.initial_k > self.hybrid.candidate_pool {
                return fail("expansion initial_k must not exceed the candidate pool".into());
            }
        }
        Ok(())
    }

    /// Short row label such as `arch3-ctx-external`.
    pub fn label(&self) -> String {
        format!(
            "arch{}-{}-{}",
            self.architecture,
            self.collection.short_name(),
            self.reranker.as_str()
        )
    }

    fn uses_file_filter(&self) -> bool {
        matches!(self.architecture, 4 | 6)
    }

    /// Results kept after reranking (before any expansion).
    fn primary_k(&self) -> usize {
        if self.architecture == 6 {
            self.expansion.initial_k
        } else {
            self.k
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageLatency {
    pub stage: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnswerTrace {
    pub config: String,
    pub original_query: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rewritten_query: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub selected_files: Option<Vec<String>>,
    /// Number of candidates handed to the reranker.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reranker_input: Option<usize>,
    pub retrieved: Vec<ScoredChunk>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub expansion_added: Option<Vec<ScoredChunk>>,
    pub answer_text: String,
    pub stages: Vec<StageLatency>,
    pub total_latency_seconds: f64,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl AnswerTrace {
    /// Ids of every chunk given to the generator, in context order.
    pub fn context_ids(&self) -> Vec<&str> {
        let extra = self.expansion_added.iter().flatten();
        self.retrieved
            .iter()
            .chain(extra)
            .map(|c| c.chunk_id.as_str())
            .collect()
    }
}

/// Chunk texts labelled with their ids, as shown to the generator and judge.
pub fn render_context(index: &Index, ids: &[&str]) -> String {
    ids.iter()
        .filter_map(|id| index.store.get(id))
        .map(|c| format!("[{}]\n{}", c.chunk_id, c.text.trim()))
        .collect::<Vec<_>>()
        .join("\n\n")
}

pub fn file_filter_schema() -> Schema {
    Schema::new().field("doc_ids", FieldKind::TextList)
}

pub struct Pipeline<'a> {
    pub index: &'a Index,
    pub gateway: &'a Gateway,
}

struct Stopwatch<'a> {
    gateway: &'a Gateway,
    stages: Vec<StageLatency>,
}

impl Stopwatch<'_> {
    fn time<T>(&mut self, stage: &str, f: impl FnOnce() -> T) -> T {
        let start = self.gateway.clock().now();
        let out = f();
        let elapsed: Duration = self.gateway.clock().now().saturating_sub(start);
        self.stages.push(StageLatency {
            stage: stage.into(),
            seconds: elapsed.as_secs_f64(),
        });
        out
    }
}

impl<'a> Pipeline<'a> {
    pub fn new(index: &'a Index, gateway: &'a Gateway) -> Self {
        Self { index, gateway }
    }

    /// Selects documents for `query` from their one-liners. Unknown ids are
    /// dropped; an empty or failed selection yields every document and a
    /// warning.
    pub fn filter_files(&self, query: &str, warnings: &mut Vec<String>) -> Vec<String> {
        let all = self.index.doc_ids();
        let catalog: Vec<String> = all
            .iter()
            .map(|id| {
                let desc = self
                    .index
                    .docmeta
                    .get(id)
                    .map_or("no description available", |m| m.one_liner.as_str());
                format!("- {id}: {desc}")
            })
            .collect();
        let schema = file_filter_schema();
        let result = Prompt::render(
            task::FILE_FILTER,
            &[("catalog", &catalog.join("\n")), ("query", query)],
            Some(&schema),
        )
        .and_then(|p| self.gateway.chat_structured(Role::PipelineHelper, &p, &schema));
        let known: BTreeSet<&str> = all.iter().map(String::as_str).collect();
        let selected: Vec<String> = match result {
            Ok(rec) => {
                let mut picked: Vec<String> = Vec::new();
                for raw in rec.list("doc_ids").unwrap_or_default() {
                    let id = raw.trim().trim_end_matches(".md");
                    if known.contains(id) && !picked.iter().any(|p| p == id) {
                        picked.push(id.to_string());
                    } else if !known.contains(id) {
                        warnings.push(format!("file filter returned unknown document `{raw}`"));
                    }
                }
                picked
            }
            Err(e) => {
                warnings.push(format!("file filter failed: {e}"));
                Vec::new()
            }
        };
        if selected.is_empty() {
            warnings.push("file filter selected nothing; searching all documents".into());
            return all;
        }
        selected
    }

    /// Reformulates `query` using the selected documents' summaries and
    /// clusters; any failure or empty reply keeps the original.
    pub fn rewrite_query(&self, query: &str, selected: &[String], warnings: &mut Vec<String>) -> String {
        let metas: Vec<_> = selected.iter().filter_map(|id| self.index.docmeta.get(id)).collect();
        if metas.is_empty() {
            warnings.push("no document metadata for rewriting; using original query".into());
            return query.to_string();
        }
        let context: Vec<String> = metas
            .iter()
            .map(|m| format!("{}: {}\nClusters: {}", m.doc_id, m.summary, m.clusters.join("; ")))
            .collect();
        let mut clusters: Vec<&str> = Vec::new();
        for c in metas.iter().flat_map(|m| &m.clusters) {
            if !clusters.contains(&c.as_str()) {
                clusters.push(c);
            }
        }
        let reply = Prompt::render(
            task::QUERY_REWRITE,
            &[
                ("context", &context.join("\n\n")),
                ("clusters", &clusters.join("; ")),
                ("query", query),
            ],
            None,
        )
        .and_then(|p| self.gateway.chat(Role::PipelineHelper, &p));
        match reply {
            Ok(text) => {
                let line = text.lines().map(str::trim).find(|l| !l.is_empty()).unwrap_or("");
                let cleaned = line.trim_matches(|c| c == '"' || c == '\'').trim();
                if cleaned.is_empty() {
                    warnings.push("query rewrite was empty; using original query".into());
                    query.to_string()
                } else {
                    cleaned.to_string()
                }
            }
            Err(e) => {
                warnings.push(format!("query rewrite failed: {e}"));
                query.to_string()
            }
        }
    }

    fn rerank(
        &self,
        cfg: &PipelineConfig,
        query: &str,
        candidates: Vec<ScoredChunk>,
        top_n: usize,
    ) -> Result<Vec<ScoredChunk>> {
        let top_n = top_n.min(candidates.len());
        if top_n == 0 {
            return Ok(candidates);
        }
        match cfg.reranker {
            RerankerKind::None => {
                let mut out = candidates;
                out.truncate(top_n);
                Ok(out)
            }
            RerankerKind::Metadata => {
                let pairs = self.with_chunks(candidates)?;
                Ok(metadata_rerank(query, &pairs, &cfg.rerank_weights, top_n)?)
            }
            RerankerKind::External => {
                let texts: Vec<String> = self
                    .with_chunks(candidates.clone())?
                    .iter()
                    .map(|(_, c)| c.field_text(cfg.collection).to_string())
                    .collect();
                let ranked = self.gateway.rerank_external(query, &texts, top_n)?;
                let mut out: Vec<ScoredChunk> = ranked
                    .into_iter()
                    .map(|(i, score)| {
                        let mut sc = candidates[i].clone();
                        sc.rerank_score = Some(score);
                        sc
                    })
                    .collect();
                renumber(&mut out);
                Ok(out)
            }
        }
    }

    fn with_chunks(&self, scored: Vec<ScoredChunk>) -> Result<Vec<(ScoredChunk, &'a Chunk)>> {
        scored
            .into_iter()
            .map(|sc| {
                let chunk = self
                    .index
                    .store
                    .get(&sc.chunk_id)
                    .ok_or_else(|| metarag_core::Error::UnknownChunk(sc.chunk_id.clone()))?;
                Ok((sc, chunk))
            })
            .collect()
    }

    pub fn answer(&self, query: &str, cfg: &PipelineConfig) -> Result<AnswerTrace> {
        cfg.validate()?;
        if query.trim().is_empty() {
            return Err(Error::Config("query is empty".into()));
        }
        let clock = self.gateway.clock();
        let started = clock.now();
        let mut watch = Stopwatch {
            gateway: self.gateway,
            stages: Vec::new(),
        };
        let mut warnings = Vec::new();

        let mut selected_files = None;
        let mut rewritten_query = None;
        let mut filter = MetadataFilter::default();
        if cfg.uses_file_filter() {
            let files = watch.time("file_filter", || self.filter_files(query, &mut warnings));
            if files.len() < self.index.doc_ids().len() {
                filter = filter.allow_docs(files.iter().map(String::as_str));
            }
            let rewritten = watch.time("query_rewrite", || self.rewrite_query(query, &files, &mut warnings));
            selected_files = Some(files);
            rewritten_query = Some(rewritten);
        }
        let search_query = rewritten_query.as_deref().unwrap_or(query);

        let qvec = watch.time("embed_query", || self.gateway.embed(&[search_query.to_string()]))?;
        let qvec = &qvec[0];
        let coll = self.index.collection(cfg.collection);
        let admit = self.index.store.admits(&filter);

        let (candidates, reranker_input) = watch.time("retrieval", || -> Result<_> {
            Ok(match cfg.architecture {
                1 => (coll.vectors.search(qvec, cfg.k, &admit)?, None),
                2 => (
                    search_hybrid(
                        &coll.lexical,
                        &cfg.bm25,
                        &coll.vectors,
                        search_query,
                        qvec,
                        &cfg.hybrid,
                        &admit,
                        cfg.k,
                    )?,
                    None,
                ),
                _ => {
                    let pool = search_hybrid(
                        &coll.lexical,
                        &cfg.bm25,
                        &coll.vectors,
                        search_query,
                        qvec,
                        &cfg.hybrid,
                        &admit,
                        cfg.hybrid.candidate_pool,
                    )?;
                    let n = pool.len();
                    (pool, Some(n))
                }
            })
        })?;

        let retrieved = if reranker_input.is_some() {
            watch.time("rerank", || self.rerank(cfg, query, candidates, cfg.primary_k()))?
        } else {
            candidates
        };

        let expansion_added = if cfg.architecture == 6 && !retrieved.is_empty() {
            Some(watch.time("expansion", || -> Result<Vec<ScoredChunk>> {
                let seeds: Vec<&Chunk> = self
                    .with_chunks(retrieved.clone())?
                    .into_iter()
                    .map(|(_, c)| c)
                    .collect();
                let core = core_concepts(&seeds);
                let total = (core.clusters.len() + core.entities.len()).max(1) as f64;
                let added = expand(&seeds, self.index.chunks(), cfg.expansion.expand_k, &|c| {
                    filter.matches(c)
                });
                Ok(added
                    .into_iter()
                    .enumerate()
                    .map(|(i, c)| {
                        let mut sc = ScoredChunk::new(c.chunk_id.clone(), i + 1);
                        sc.rerank_score = Some(concept_matches(&core, c) as f64 / total);
                        sc
                    })
                    .collect())
            })?)
        } else if cfg.architecture == 6 {
            Some(Vec::new())
        } else {
            None
        };

        let mut trace = AnswerTrace {
            config: cfg.label(),
            original_query: query.to_string(),
            rewritten_query,
            selected_files,
            reranker_input,
            retrieved,
            expansion_added,
            answer_text: String::new(),
            stages: Vec::new(),
            total_latency_seconds: 0.0,
            warnings,
        };
        let context = render_context(self.index, &trace.context_ids());
        let context = if context.is_empty() {
            "(no context retrieved)".to_string()
        } else {
            context
        };
        let prompt = Prompt::render(task::ANSWER, &[("context", &context), ("query", query)], None)?;
        trace.answer_text = watch.time("generation", || self.gateway.chat(Role::Generator, &prompt))?;
        trace.stages = watch.stages;
        trace.total_latency_seconds = clock.now().saturating_sub(started).as_secs_f64();
        Ok(trace)
    }
}

/// Per-stage latency totals over many traces, keyed by stage name.
pub fn stage_totals(traces: &[AnswerTrace]) -> BTreeMap<String, f64> {
    let mut out = BTreeMap::new();
    for t in traces {
        for s in &t.stages {
            *out.entry(s.stage.clone()).or_insert(0.0) += s.seconds;
        }
    }
    out
}
