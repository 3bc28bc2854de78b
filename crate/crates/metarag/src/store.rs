//! On-disk index layout and the in-memory searchable index.
//!
//! ```text
//! manifest.json     versions, counts, dimension, chunking parameters, analyzer
//! chunks.jsonl      one chunk per line, storage order
//! vectors_std.f32   little-endian f32, row-major, row i = line i of chunks.jsonl
//! vectors_ctx.f32   same, embedded from the contextual text
//! docmeta.json      doc_id -> one_liner, summary, clusters
//! ```
//!
//! Lexical indexes are rebuilt from `chunks.jsonl` at load time.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use metarag_core::lexical::LexicalIndex;
use metarag_core::text::ANALYZER_ID;
use metarag_core::vector::{VectorIndex, VectorRecord};
use metarag_core::{Chunk, ChunkStore, Collection, DocumentMetadata};
use serde::{Deserialize, Serialize};

use crate::corpus::SkippedFile;
use crate::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;
pub const MANIFEST: &str = "manifest.json";
pub const CHUNKS: &str = "chunks.jsonl";
pub const DOCMETA: &str = "docmeta.json";

pub fn vectors_file(c: Collection) -> String {
    format!("vectors_{}.f32", c.short_name())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChunkingSummary {
    pub max_tokens: usize,
    pub overlap_tokens: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnrichmentCounts {
    pub succeeded: usize,
    pub failed: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub tool_version: String,
    pub prompt_version: String,
    pub analyzer: String,
    pub documents: usize,
    pub chunks: usize,
    pub collections: Vec<Collection>,
    pub dimension: usize,
    pub chunking: ChunkingSummary,
    pub doc_char_budget: usize,
    pub embedder_model: String,
    pub enricher_model: String,
    pub failed_documents: Vec<String>,
    pub skipped_files: Vec<SkippedFile>,
    pub chunk_enrichment: EnrichmentCounts,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct DocMetaEntry {
    one_liner: String,
    summary: String,
    clusters: Vec<String>,
}

/// Sparse and dense indexes over one text representation.
#[derive(Debug, Clone)]
pub struct CollectionIndex {
    pub lexical: LexicalIndex,
    pub vectors: VectorIndex,
}

#[derive(Debug, Clone)]
pub struct Index {
    pub manifest: Manifest,
    pub store: ChunkStore,
    /// Documents whose enrichment failed have no entry.
    pub docmeta: BTreeMap<String, DocumentMetadata>,
    standard: CollectionIndex,
    contextual: CollectionIndex,
}

fn vector_index(chunks: &[Chunk], vectors: Vec<Vec<f32>>) -> Result<VectorIndex> {
    if vectors.len() != chunks.len() {
        return Err(Error::Config(format!(
            "{} vectors for {} chunks",
            vectors.len(),
            chunks.len()
        )));
    }
    let mut index = VectorIndex::new();
    for (chunk, v) in chunks.iter().zip(vectors) {
        index.add(VectorRecord::new(chunk.chunk_id.clone(), v))?;
    }
    Ok(index)
}

impl Index {
    /// Assembles an index from chunks in storage order and one vector per
    /// chunk for each collection.
    pub fn from_parts(
        manifest: Manifest,
        chunks: Vec<Chunk>,
        docmeta: BTreeMap<String, DocumentMetadata>,
        standard_vectors: Vec<Vec<f32>>,
        contextual_vectors: Vec<Vec<f32>>,
    ) -> Result<Self> {
        let standard = CollectionIndex {
            lexical: LexicalIndex::build(&chunks, Collection::Standard)?,
            vectors: vector_index(&chunks, standard_vectors)?,
        };
        let contextual = CollectionIndex {
            lexical: LexicalIndex::build(&chunks, Collection::Contextual)?,
            vectors: vector_index(&chunks, contextual_vectors)?,
        };
        if standard.vectors.dim() != contextual.vectors.dim() {
            return Err(Error::Config("collections have different dimensions".into()));
        }
        Ok(Self {
            manifest,
            store: ChunkStore::new(chunks)?,
            docmeta,
            standard,
            contextual,
        })
    }

    pub fn collection(&self, c: Collection) -> &CollectionIndex {
        match c {
            Collection::Standard => &self.standard,
            Collection::Contextual => &self.contextual,
        }
    }

    pub fn chunks(&self) -> &[Chunk] {
        self.store.chunks()
    }

    pub fn dimension(&self) -> usize {
        self.standard.vectors.dim().unwrap_or(0)
    }

    /// Doc ids in the index, sorted.
    pub fn doc_ids(&self) -> Vec<String> {
        let ids: std::collections::BTreeSet<&str> = self.chunks().iter().map(|c| c.doc_id.as_str()).collect();
        ids.into_iter().map(str::to_string).collect()
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_json(&dir.join(MANIFEST), &self.manifest)?;

        let path = dir.join(CHUNKS);
        let file = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
        let mut w = BufWriter::new(file);
        for chunk in self.chunks() {
            serde_json::to_writer(&mut w, chunk).map_err(|e| Error::format(&path, e))?;
            w.write_all(b"\n").map_err(|e| Error::io(&path, e))?;
        }
        w.flush().map_err(|e| Error::io(&path, e))?;

        for c in Collection::ALL {
            let path = dir.join(vectors_file(c));
            let records = self.collection(c).vectors.records();
            let mut bytes = Vec::with_capacity(records.len() * self.dimension() * 4);
            for r in records {
                for x in &r.vector {
                    bytes.extend_from_slice(&x.to_le_bytes());
                }
            }
            fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
        }

        let docmeta: BTreeMap<&str, DocMetaEntry> = self
            .docmeta
            .iter()
            .map(|(id, m)| {
                (
                    id.as_str(),
                    DocMetaEntry {
                        one_liner: m.one_liner.clone(),
                        summary: m.summary.clone(),
                        clusters: m.clusters.clone(),
                    },
                )
            })
            .collect();
        write_json(&dir.join(DOCMETA), &docmeta)
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let manifest: Manifest = read_json(&dir.join(MANIFEST))?;
        if manifest.format_version != FORMAT_VERSION {
            return Err(Error::format(
                dir.join(MANIFEST),
                format!("unsupported format version {}", manifest.format_version),
            ));
        }
        if manifest.analyzer != ANALYZER_ID {
            return Err(Error::format(
                dir.join(MANIFEST),
                format!("index built with analyzer `{}`", manifest.analyzer),
            ));
        }

        let path = dir.join(CHUNKS);
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let chunks = text
            .lines()
            .enumerate()
            .map(|(i, line)| {
                serde_json::from_str::<Chunk>(line).map_err(|e| Error::format(&path, format!("line {}: {e}", i + 1)))
            })
            .collect::<Result<Vec<_>>>()?;
        if chunks.len() != manifest.chunks {
            return Err(Error::format(
                &path,
                format!("{} chunks, manifest says {}", chunks.len(), manifest.chunks),
            ));
        }

        let dim = manifest.dimension;
        let mut blobs = Vec::with_capacity(2);
        for c in Collection::ALL {
            let path = dir.join(vectors_file(c));
            let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
            if dim == 0 || bytes.len() != chunks.len() * dim * 4 {
                return Err(Error::format(
                    &path,
                    format!("{} bytes for {} rows of dimension {dim}", bytes.len(), chunks.len()),
                ));
            }
            let floats: Vec<f32> = bytes
                .chunks_exact(4)
                .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
                .collect();
            blobs.push(floats.chunks_exact(dim).map(<[f32]>::to_vec).collect::<Vec<_>>());
        }
        let contextual_vectors = blobs.pop().unwrap_or_default();
        let standard_vectors = blobs.pop().unwrap_or_default();

        let raw: BTreeMap<String, DocMetaEntry> = read_json(&dir.join(DOCMETA))?;
        let docmeta = raw
            .into_iter()
            .map(|(doc_id, e)| {
                let meta = DocumentMetadata {
                    doc_id: doc_id.clone(),
                    one_liner: e.one_liner,
                    summary: e.summary,
                    clusters: e.clusters,
                };
                (doc_id, meta)
            })
            .collect();
        Self::from_parts(manifest, chunks, docmeta, standard_vectors, contextual_vectors)
    }
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::format(path, e))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::format(path, e))
}
