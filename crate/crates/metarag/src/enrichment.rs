//! Offline indexing: split, enrich documents and chunks, build contextual
//! text, embed both representations and persist.

use std::borrow::Cow;
use std::collections::BTreeMap;
use std::path::Path;

use metarag_core::chunker::{self, ChunkingParams};
use metarag_core::text::normalize_label;
use metarag_core::{Chunk, ChunkMetadata, Collection, Document, DocumentMetadata};
use rayon::prelude::*;

use crate::corpus::{self, SkippedFile};
use crate::gateway::{FieldKind, Gateway, GatewayError, Role, Schema};
use crate::prompts::{task, Prompt, PROMPT_VERSION};
use crate::store::{ChunkingSummary, EnrichmentCounts, Index, Manifest, FORMAT_VERSION};
use crate::Result;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EnrichmentOptions {
    pub chunking: ChunkingParams,
    /// Character budget for the document text sent to the enricher.
    pub doc_char_budget: usize,
}

impl Default for EnrichmentOptions {
    fn default() -> Self {
        Self {
            chunking: ChunkingParams::default(),
            doc_char_budget: 200_000,
        }
    }
}

pub fn doc_schema() -> Schema {
    Schema::new()
        .field("one_liner", FieldKind::Text)
        .field("summary", FieldKind::Text)
        .field(
            "clusters",
            FieldKind::BoundedList {
                min: DocumentMetadata::MIN_CLUSTERS,
                max: DocumentMetadata::MAX_CLUSTERS,
            },
        )
}

pub fn chunk_schema() -> Schema {
    Schema::new()
        .field(
            "parent_clusters",
            FieldKind::BoundedList {
                min: ChunkMetadata::MIN_PARENT_CLUSTERS,
                max: ChunkMetadata::MAX_PARENT_CLUSTERS,
            },
        )
        .field("chunk_entities", FieldKind::TextList)
        .field(
            "answered_questions",
            FieldKind::BoundedList {
                min: ChunkMetadata::MIN_QUESTIONS,
                max: ChunkMetadata::MAX_QUESTIONS,
            },
        )
        .field("retrieval_nuggets", FieldKind::TextList)
}

/// The whole text when it fits `budget` characters, otherwise its first and
/// last `budget / 2` characters around an elision marker.
pub fn sample_text(text: &str, budget: usize) -> Cow<'_, str> {
    let total = text.chars().count();
    if total <= budget {
        return Cow::Borrowed(text);
    }
    let half = budget / 2;
    let head_end = text.char_indices().nth(half).map_or(text.len(), |(i, _)| i);
    let tail_start = text.char_indices().nth(total - half).map_or(text.len(), |(i, _)| i);
    Cow::Owned(format!("{}\n\n[...]\n\n{}", &text[..head_end], &text[tail_start..]))
}

pub fn enrich_document(
    gw: &Gateway,
    doc: &Document,
    opts: &EnrichmentOptions,
) -> Result<DocumentMetadata, GatewayError> {
    let schema = doc_schema();
    let text = sample_text(&doc.markdown_text, opts.doc_char_budget);
    let prompt = Prompt::render(
        task::DOC_METADATA,
        &[("file_name", &doc.file_name), ("text", &text)],
        Some(&schema),
    )?;
    let mut rec = gw.chat_structured(Role::Enricher, &prompt, &schema)?;
    let one_liner = rec
        .take_text("one_liner")
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ");
    Ok(DocumentMetadata {
        doc_id: doc.doc_id.clone(),
        one_liner,
        summary: rec.take_text("summary"),
        clusters: rec.take_list("clusters"),
    })
}

/// Keeps proposed parent clusters that name a document cluster (compared
/// after normalization, stored with the document's spelling); falls back to
/// the first document cluster when none survive.
pub fn repair_parent_clusters(proposed: &[String], doc_clusters: &[String]) -> Vec<String> {
    let canonical: BTreeMap<String, &String> = doc_clusters.iter().rev().map(|c| (normalize_label(c), c)).collect();
    let mut out: Vec<String> = Vec::new();
    for p in proposed {
        if let Some(c) = canonical.get(&normalize_label(p)) {
            if !out.contains(c) {
                out.push((*c).clone());
            }
        }
    }
    out.truncate(ChunkMetadata::MAX_PARENT_CLUSTERS);
    if out.is_empty() {
        out.extend(doc_clusters.first().cloned());
    }
    out
}

pub fn enrich_chunk(gw: &Gateway, chunk: &Chunk, doc_meta: &DocumentMetadata) -> Result<ChunkMetadata, GatewayError> {
    if chunk.doc_id != doc_meta.doc_id {
        return Err(GatewayError::Input(format!(
            "chunk {} does not belong to document {}",
            chunk.chunk_id, doc_meta.doc_id
        )));
    }
    let schema = chunk_schema();
    let clusters = doc_meta.clusters.join("\n");
    let prompt = Prompt::render(
        task::CHUNK_METADATA,
        &[
            ("summary", &doc_meta.summary),
            ("clusters", &clusters),
            ("chunk_text", &chunk.text),
        ],
        Some(&schema),
    )?;
    let mut rec = gw.chat_structured(Role::Enricher, &prompt, &schema)?;
    let proposed = rec.take_list("parent_clusters");
    Ok(ChunkMetadata {
        parent_clusters: repair_parent_clusters(&proposed, &doc_meta.clusters),
        chunk_entities: rec.take_list("chunk_entities"),
        answered_questions: rec.take_list("answered_questions"),
        retrieval_nuggets: rec.take_list("retrieval_nuggets"),
    })
}

/// Enriched chunks and document metadata before embedding.
#[derive(Debug, Clone, Default)]
pub struct EnrichedCorpus {
    pub chunks: Vec<Chunk>,
    pub docmeta: BTreeMap<String, DocumentMetadata>,
    pub failed_documents: Vec<String>,
    pub counts: EnrichmentCounts,
}

/// Runs document and chunk enrichment over `docs` in order. Chunks of one
/// document are enriched in parallel, bounded by the gateway ceiling.
pub fn enrich_corpus(gw: &Gateway, docs: &[Document], opts: &EnrichmentOptions) -> Result<EnrichedCorpus> {
    opts.chunking.validate()?;
    let mut out = EnrichedCorpus::default();
    for doc in docs {
        let chunks = chunker::split(doc, &opts.chunking)?;
        let meta = match enrich_document(gw, doc, opts) {
            Ok(m) => m,
            Err(e) => {
                log::warn!("document {} not enriched: {e}", doc.doc_id);
                out.failed_documents.push(doc.doc_id.clone());
                out.counts.failed += chunks.len();
                out.chunks
                    .extend(chunks.into_iter().map(|c| c.with_metadata(ChunkMetadata::default())));
                continue;
            }
        };
        let enriched: Vec<(Chunk, bool)> = chunks
            .into_par_iter()
            .map(|c| match enrich_chunk(gw, &c, &meta) {
                Ok(m) => (c.with_metadata(m), true),
                Err(e) => {
                    log::warn!("chunk {} not enriched: {e}", c.chunk_id);
                    (c.with_metadata(ChunkMetadata::default()), false)
                }
            })
            .collect();
        for (chunk, ok) in enriched {
            if ok {
                out.counts.succeeded += 1;
            } else {
                out.counts.failed += 1;
            }
            out.chunks.push(chunk);
        }
        out.docmeta.insert(doc.doc_id.clone(), meta);
    }
    Ok(out)
}

/// Embeds both representations, assembles the index and its manifest.
pub fn build_from_documents(
    gw: &Gateway,
    docs: &[Document],
    skipped: &[SkippedFile],
    opts: &EnrichmentOptions,
) -> Result<Index> {
    let enriched = enrich_corpus(gw, docs, opts)?;
    let texts =
        |c: Collection| -> Vec<String> { enriched.chunks.iter().map(|ch| ch.field_text(c).to_string()).collect() };
    let standard = gw.embed(&texts(Collection::Standard))?;
    let contextual = gw.embed(&texts(Collection::Contextual))?;
    let dimension = standard.first().map_or(0, Vec::len);
    let manifest = Manifest {
        format_version: FORMAT_VERSION,
        tool_version: env!("CARGO_PKG_VERSION").into(),
        prompt_version: PROMPT_VERSION.into(),
        analyzer: metarag_core::text::ANALYZER_ID.into(),
        documents: docs.len(),
        chunks: enriched.chunks.len(),
        collections: Collection::ALL.to_vec(),
        dimension,
        chunking: ChunkingSummary {
            max_tokens: opts.chunking.max_tokens,
            overlap_tokens: opts.chunking.overlap_tokens,
        },
        doc_char_budget: opts.doc_char_budget,
        embedder_model: gw.model(Role::Embedder)?.into(),
        enricher_model: gw.model(Role::Enricher)?.into(),
        failed_documents: enriched.failed_documents,
        skipped_files: skipped.to_vec(),
        chunk_enrichment: enriched.counts,
    };
    Index::from_parts(manifest, enriched.chunks, enriched.docmeta, standard, contextual)
}

/// Loads `corpus_dir`, builds the index and writes it to `out_dir`.
pub fn build_index(gw: &Gateway, corpus_dir: &Path, out_dir: &Path, opts: &EnrichmentOptions) -> Result<Index> {
    let corpus = corpus::load(corpus_dir)?;
    let index = build_from_documents(gw, &corpus.documents, &corpus.skipped, opts)?;
    index.write(out_dir)?;
    Ok(index)
}
