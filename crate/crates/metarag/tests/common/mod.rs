#![allow(dead_code)]

pub mod judge;

use std::path::PathBuf;
use std::sync::{Arc, OnceLock};

use metarag::corpus;
use metarag::enrichment::{build_from_documents, EnrichmentOptions};
use metarag::gateway::mock::MockProvider;
use metarag::gateway::{Gateway, ProviderConfig};
use metarag::store::Index;
use metarag_core::chunker::ChunkingParams;

pub fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

pub fn corpus_dir() -> PathBuf {
    fixtures().join("corpus")
}

/// Small chunks so the three fixture filings yield a few dozen chunks.
pub fn options() -> EnrichmentOptions {
    EnrichmentOptions {
        chunking: ChunkingParams::new(60, 10),
        ..EnrichmentOptions::default()
    }
}

pub fn gateway_with(mock: MockProvider) -> Gateway {
    Gateway::new(Arc::new(mock), ProviderConfig::mock()).unwrap()
}

pub fn build(gw: &Gateway) -> Index {
    let c = corpus::load(&corpus_dir()).unwrap();
    build_from_documents(gw, &c.documents, &c.skipped, &options()).unwrap()
}

/// Fixture index built once with the plain mock provider.
pub fn fixture_index() -> &'static Index {
    static INDEX: OnceLock<Index> = OnceLock::new();
    INDEX.get_or_init(|| build(&Gateway::mock()))
}
