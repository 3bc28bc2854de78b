//! Retrieval primitives for a metadata-driven RAG stack.
//!
//! Everything here is pure computation over owned data and only needs `alloc`:
//! recursive chunking, a BM25/TF-IDF inverted index, an exact cosine vector
//! index, min-max hybrid fusion, the four-component metadata reranker, metadata
//! chunk expansion and the claim-level evaluation metrics. IO, LLM access and
//! orchestration live in the `metarag` crate.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod chunker;
mod error;
pub mod expansion;
pub mod hybrid;
pub mod lexical;
pub mod metrics;
pub mod model;
pub mod rerank;
pub mod text;
mod topk;
pub mod vector;

pub use error::{Error, Result};
pub use model::{
    Chunk, ChunkMetadata, ChunkStore, Collection, Document, DocumentMetadata, MetadataFilter, RerankComponents,
    ScoredChunk, SourcePeriod,
};
pub use topk::rank_descending;
