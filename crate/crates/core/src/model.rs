//! Shared domain types and the metadata filter predicate.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::text::normalize_label;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourcePeriod {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub year: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quarter: Option<String>,
}

/// A source file converted to Markdown. `doc_id` is the file stem.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub doc_id: String,
    pub file_name: String,
    pub markdown_text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_period: Option<SourcePeriod>,
}

/// Document-level enrichment: headline sentence, analytical summary and the
/// thematic cluster taxonomy used to label the document's chunks.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocumentMetadata {
    pub doc_id: String,
    pub one_liner: String,
    pub summary: String,
    pub clusters: Vec<String>,
}

impl DocumentMetadata {
    pub const MIN_CLUSTERS: usize = 5;
    pub const MAX_CLUSTERS: usize = 20;
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChunkMetadata {
    pub parent_clusters: Vec<String>,
    pub chunk_entities: Vec<String>,
    pub answered_questions: Vec<String>,
    pub retrieval_nuggets: Vec<String>,
}

impl ChunkMetadata {
    pub const MIN_PARENT_CLUSTERS: usize = 1;
    pub const MAX_PARENT_CLUSTERS: usize = 2;
    pub const MIN_QUESTIONS: usize = 3;
    pub const MAX_QUESTIONS: usize = 10;

    pub fn is_empty(&self) -> bool {
        self.parent_clusters.is_empty()
            && self.chunk_entities.is_empty()
            && self.answered_questions.is_empty()
            && self.retrieval_nuggets.is_empty()
    }
}

/// Which text representation of a chunk an index was built from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Collection {
    Standard,
    Contextual,
}

impl Collection {
    pub const ALL: [Collection; 2] = [Collection::Standard, Collection::Contextual];

    pub fn short_name(self) -> &'static str {
        match self {
            Collection::Standard => "std",
            Collection::Contextual => "ctx",
        }
    }
}

/// A retrieval unit: a contiguous span of a document plus its enrichment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Chunk {
    pub chunk_id: String,
    pub doc_id: String,
    pub ordinal: usize,
    /// Byte offsets of `text` within the source Markdown.
    pub start: usize,
    pub end: usize,
    pub text: String,
    pub metadata: ChunkMetadata,
    pub contextual_text: String,
}

impl Chunk {
    pub fn make_id(doc_id: &str, ordinal: usize) -> String {
        format!("{doc_id}#{ordinal}")
    }

    /// Text indexed for the given collection.
    pub fn field_text(&self, collection: Collection) -> &str {
        match collection {
            Collection::Standard => &self.text,
            Collection::Contextual => &self.contextual_text,
        }
    }
}

/// Chunks in storage order with lookup by id.
#[derive(Debug, Clone, Default)]
pub struct ChunkStore {
    chunks: Vec<Chunk>,
    by_id: BTreeMap<String, usize>,
}

impl ChunkStore {
    pub fn new(chunks: Vec<Chunk>) -> Result<Self> {
        let mut by_id = BTreeMap::new();
        for (row, chunk) in chunks.iter().enumerate() {
            if by_id.insert(chunk.chunk_id.clone(), row).is_some() {
                return Err(Error::DuplicateId(chunk.chunk_id.clone()));
            }
        }
        Ok(Self { chunks, by_id })
    }

    pub fn len(&self) -> usize {
        self.chunks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chunks.is_empty()
    }

    pub fn chunks(&self) -> &[Chunk] {
        &self.chunks
    }

    pub fn get(&self, chunk_id: &str) -> Option<&Chunk> {
        self.by_id.get(chunk_id).map(|&row| &self.chunks[row])
    }

    pub fn row_of(&self, chunk_id: &str) -> Option<usize> {
        self.by_id.get(chunk_id).copied()
    }

    /// Filter predicate over chunk ids; unknown ids never pass.
    pub fn admits<'a>(&'a self, filter: &'a MetadataFilter) -> impl Fn(&str) -> bool + 'a {
        move |id| self.get(id).is_some_and(|c| filter.matches(c))
    }
}

/// Conjunction of optional constraints on chunks. Absent or empty sets impose
/// nothing; `excluded_chunk_ids` always applies. Cluster and entity sets are
/// match-any and compared after [`normalize_label`].
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetadataFilter {
    pub allowed_doc_ids: Option<BTreeSet<String>>,
    pub required_clusters: Option<BTreeSet<String>>,
    pub required_entities: Option<BTreeSet<String>>,
    pub excluded_chunk_ids: BTreeSet<String>,
}

impl MetadataFilter {
    pub fn allow_docs<I, S>(mut self, ids: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.allowed_doc_ids = Some(ids.into_iter().map(Into::into).collect());
        self
    }

    pub fn require_clusters<I, S>(mut self, labels: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        self.required_clusters = Some(labels.into_iter().map(|s| normalize_label(s.as_ref())).collect());
        self
    }

    pub fn require_entities<I, S>(mut self, labels: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        self.required_entities = Some(labels.into_iter().map(|s| normalize_label(s.as_ref())).collect());
        self
    }

    pub fn exclude<I, S>(mut self, ids: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.excluded_chunk_ids.extend(ids.into_iter().map(Into::into));
        self
    }

    pub fn is_unconstrained(&self) -> bool {
        fn open(set: &Option<BTreeSet<String>>) -> bool {
            set.as_ref().is_none_or(BTreeSet::is_empty)
        }
        open(&self.allowed_doc_ids)
            && open(&self.required_clusters)
            && open(&self.required_entities)
            && self.excluded_chunk_ids.is_empty()
    }

    pub fn matches(&self, chunk: &Chunk) -> bool {
        if self.excluded_chunk_ids.contains(&chunk.chunk_id) {
            return false;
        }
        if let Some(allowed) = self.allowed_doc_ids.as_ref().filter(|s| !s.is_empty()) {
            if !allowed.contains(&chunk.doc_id) {
                return false;
            }
        }
        if let Some(required) = self.required_clusters.as_ref().filter(|s| !s.is_empty()) {
            if !intersects(required, &chunk.metadata.parent_clusters) {
                return false;
            }
        }
        if let Some(required) = self.required_entities.as_ref().filter(|s| !s.is_empty()) {
            if !intersects(required, &chunk.metadata.chunk_entities) {
                return false;
            }
        }
        true
    }
}

// Filter sets built through the builders are already normalized; normalizing
// both sides keeps hand-constructed filters correct too.
fn intersects(required: &BTreeSet<String>, labels: &[String]) -> bool {
    labels.iter().any(|label| {
        let label = normalize_label(label);
        required.iter().any(|r| normalize_label(r) == label)
    })
}

/// Per-component scores of the metadata reranker, each in `[0, 1]`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct RerankComponents {
    pub entity_freq: f64,
    pub cluster_coherence: f64,
    pub entity_query: f64,
    pub retrieval: f64,
}

/// A ranked retrieval result with provenance-tagged scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredChunk {
    pub chunk_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dense_score: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sparse_score: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fused_score: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rerank_score: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rerank_components: Option<RerankComponents>,
    /// 1-based, gapless within a result list.
    pub rank: usize,
}

impl ScoredChunk {
    pub fn new(chunk_id: impl Into<String>, rank: usize) -> Self {
        Self {
            chunk_id: chunk_id.into(),
            dense_score: None,
            sparse_score: None,
            fused_score: None,
            rerank_score: None,
            rerank_components: None,
            rank,
        }
    }

    /// The score the result was last ordered by.
    pub fn effective_score(&self) -> Option<f64> {
        self.rerank_score
            .or(self.fused_score)
            .or(self.dense_score)
            .or(self.sparse_score)
    }

    /// Score handed to downstream rerankers as the "original retrieval" signal.
    pub fn retrieval_score(&self) -> Option<f64> {
        self.fused_score.or(self.dense_score).or(self.sparse_score)
    }
}

/// Rewrites `rank` fields to 1..=n in list order.
pub fn renumber(results: &mut [ScoredChunk]) {
    for (i, r) in results.iter_mut().enumerate() {
        r.rank = i + 1;
    }
}
