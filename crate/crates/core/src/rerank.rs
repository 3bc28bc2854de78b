//! Four-component metadata reranker.
//!
//! For a candidate `c` in candidate set `S`:
//! - `entity_freq`: mean over the distinct entities of `c` of the share of
//!   candidates mentioning that entity;
//! - `cluster_coherence`: the same statistic over parent clusters;
//! - `entity_query`: share of the entities of `c` that occur as a contiguous
//!   token phrase in the query;
//! - `retrieval`: the incoming retrieval score min-max normalized over `S`.
//!
//! `c` counts itself in every share, so components are in `[0, 1]` and the
//! weighted sum is a convex combination.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hybrid::MinMax;
use crate::model::{Chunk, RerankComponents, ScoredChunk};
use crate::text::{analyze, contains_phrase, label_tokens, normalize_label};
use crate::topk::top_k_by;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RerankWeights {
    pub entity_freq: f64,
    pub cluster_coherence: f64,
    pub entity_query: f64,
    pub retrieval: f64,
}

impl Default for RerankWeights {
    fn default() -> Self {
        Self {
            entity_freq: 0.25,
            cluster_coherence: 0.25,
            entity_query: 0.25,
            retrieval: 0.25,
        }
    }
}

impl RerankWeights {
    pub fn new(entity_freq: f64, cluster_coherence: f64, entity_query: f64, retrieval: f64) -> Result<Self> {
        let w = Self {
            entity_freq,
            cluster_coherence,
            entity_query,
            retrieval,
        };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        let parts = [
            self.entity_freq,
            self.cluster_coherence,
            self.entity_query,
            self.retrieval,
        ];
        if parts.iter().any(|w| w.is_nan() || *w < 0.0) {
            return Err(Error::InvalidParams("rerank weights must be non-negative".into()));
        }
        if (parts.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParams("rerank weights must sum to 1".into()));
        }
        Ok(())
    }

    pub fn composite(&self, c: &RerankComponents) -> f64 {
        self.entity_freq * c.entity_freq
            + self.cluster_coherence * c.cluster_coherence
            + self.entity_query * c.entity_query
            + self.retrieval * c.retrieval
    }
}

fn distinct_normalized(labels: &[String]) -> BTreeSet<String> {
    labels
        .iter()
        .map(|l| normalize_label(l))
        .filter(|l| !l.is_empty())
        .collect()
}

/// Mean share of candidates carrying each of `own` labels; 0 when `own` is empty.
fn mean_share(own: &BTreeSet<String>, counts: &BTreeMap<String, usize>, total: usize) -> f64 {
    if own.is_empty() {
        return 0.0;
    }
    let sum: f64 = own
        .iter()
        .map(|l| counts.get(l).copied().unwrap_or(0) as f64 / total as f64)
        .sum();
    sum / own.len() as f64
}

/// Entity/query component alone; independent of the rest of the candidate set.
pub fn entity_query_match(query: &str, entities: &[String]) -> f64 {
    let q = analyze(&normalize_label(query));
    let own = distinct_normalized(entities);
    let hits = own.iter().filter(|e| contains_phrase(&q, &label_tokens(e))).count();
    hits as f64 / own.len().max(1) as f64
}

/// Component scores for every candidate, in input order.
pub fn components(query: &str, candidates: &[(ScoredChunk, &Chunk)]) -> Result<Vec<RerankComponents>> {
    if candidates.is_empty() {
        return Err(Error::EmptyCandidates);
    }
    let total = candidates.len();
    let entity_sets: Vec<_> = candidates
        .iter()
        .map(|(_, c)| distinct_normalized(&c.metadata.chunk_entities))
        .collect();
    let cluster_sets: Vec<_> = candidates
        .iter()
        .map(|(_, c)| distinct_normalized(&c.metadata.parent_clusters))
        .collect();
    let tally = |sets: &[BTreeSet<String>]| {
        let mut counts: BTreeMap<String, usize> = BTreeMap::new();
        for set in sets {
            for label in set {
                *counts.entry(label.clone()).or_default() += 1;
            }
        }
        counts
    };
    let entity_counts = tally(&entity_sets);
    let cluster_counts = tally(&cluster_sets);
    let range = MinMax::observe(candidates.iter().map(|(s, _)| s.retrieval_score().unwrap_or(0.0)));

    Ok(candidates
        .iter()
        .enumerate()
        .map(|(i, (scored, chunk))| RerankComponents {
            entity_freq: mean_share(&entity_sets[i], &entity_counts, total),
            cluster_coherence: mean_share(&cluster_sets[i], &cluster_counts, total),
            entity_query: entity_query_match(query, &chunk.metadata.chunk_entities),
            retrieval: range.map_or(0.5, |r| r.normalize(scored.retrieval_score().unwrap_or(0.0))),
        })
        .collect())
}

/// Reorders candidates by the weighted composite and keeps `top_n`.
/// Each result keeps its incoming scores and gains `rerank_score` and
/// `rerank_components`.
pub fn metadata_rerank(
    query: &str,
    candidates: &[(ScoredChunk, &Chunk)],
    weights: &RerankWeights,
    top_n: usize,
) -> Result<Vec<ScoredChunk>> {
    weights.validate()?;
    let comps = components(query, candidates)?;
    let scored = candidates.iter().zip(comps).map(|((sc, _), comp)| {
        let composite = weights.composite(&comp);
        (sc.chunk_id.clone(), composite, (sc.clone(), comp))
    });
    Ok(top_k_by(scored, top_n)
        .into_iter()
        .enumerate()
        .map(|(i, (_, composite, (mut sc, comp)))| {
            sc.rerank_score = Some(composite);
            sc.rerank_components = Some(comp);
            sc.rank = i + 1;
            sc
        })
        .collect())
}
