//! Weighted dense + sparse fusion over min-max normalized scores.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lexical::{Bm25Params, LexicalIndex};
use crate::model::ScoredChunk;
use crate::topk::top_k_by;
use crate::vector::VectorIndex;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HybridParams {
    /// Weight of the dense score; `1 - lambda` goes to the sparse score.
    pub lambda: f64,
    /// Results requested from each underlying scorer.
    pub candidate_pool: usize,
}

impl Default for HybridParams {
    fn default() -> Self {
        Self {
            lambda: 0.5,
            candidate_pool: 25,
        }
    }
}

impl HybridParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(Error::InvalidParams("lambda must be in [0, 1]".into()));
        }
        if self.candidate_pool == 0 {
            return Err(Error::InvalidParams("candidate_pool must be positive".into()));
        }
        Ok(())
    }
}

/// Maps raw scores onto `[0, 1]` by `(x - min) / (max - min)`; a constant
/// scorer maps everything to 0.5.
#[derive(Debug, Clone, Copy)]
pub struct MinMax {
    pub min: f64,
    pub max: f64,
}

impl MinMax {
    pub fn observe<I: IntoIterator<Item = f64>>(values: I) -> Option<Self> {
        values.into_iter().fold(None, |acc, v| match acc {
            None => Some(Self { min: v, max: v }),
            Some(m) => Some(Self {
                min: m.min.min(v),
                max: m.max.max(v),
            }),
        })
    }

    pub fn normalize(&self, x: f64) -> f64 {
        if self.max > self.min {
            ((x - self.min) / (self.max - self.min)).clamp(0.0, 1.0)
        } else {
            0.5
        }
    }
}

/// Fuses two ranked lists. Chunks seen by only one scorer get the other
/// scorer's observed minimum before normalization; a scorer with no results
/// contributes 0. Returns the top `k` by fused score, ties by chunk id.
pub fn fuse(dense: &[ScoredChunk], sparse: &[ScoredChunk], lambda: f64, k: usize) -> Vec<ScoredChunk> {
    let mut union: BTreeMap<&str, (Option<f64>, Option<f64>)> = BTreeMap::new();
    for d in dense {
        union.entry(&d.chunk_id).or_default().0 = d.dense_score;
    }
    for s in sparse {
        union.entry(&s.chunk_id).or_default().1 = s.sparse_score;
    }
    let dense_range = MinMax::observe(union.values().filter_map(|v| v.0));
    let sparse_range = MinMax::observe(union.values().filter_map(|v| v.1));
    let norm = |range: Option<MinMax>, raw: Option<f64>| match range {
        Some(r) => r.normalize(raw.unwrap_or(r.min)),
        None => 0.0,
    };

    let fused = union.into_iter().map(|(id, (d, s))| {
        let score = lambda * norm(dense_range, d) + (1.0 - lambda) * norm(sparse_range, s);
        (String::from(id), score, (d, s))
    });
    top_k_by(fused, k)
        .into_iter()
        .enumerate()
        .map(|(i, (id, score, (d, s)))| {
            let mut sc = ScoredChunk::new(id, i + 1);
            sc.dense_score = d;
            sc.sparse_score = s;
            sc.fused_score = Some(score);
            sc
        })
        .collect()
}

/// Sequential hybrid search: `candidate_pool` results from each index under
/// the same admission predicate, fused and cut to `k`.
#[allow(clippy::too_many_arguments)]
pub fn search_hybrid<T: Copy + Into<f64>>(
    lexical: &LexicalIndex,
    bm25: &Bm25Params,
    vectors: &VectorIndex,
    query: &str,
    query_vector: &[T],
    params: &HybridParams,
    admit: &dyn Fn(&str) -> bool,
    k: usize,
) -> Result<Vec<ScoredChunk>> {
    params.validate()?;
    if k > params.candidate_pool {
        return Err(Error::InvalidParams("k must not exceed candidate_pool".into()));
    }
    let dense = vectors.search(query_vector, params.candidate_pool, admit)?;
    let sparse = lexical.search(bm25, query, params.candidate_pool, admit);
    Ok(fuse(&dense, &sparse, params.lambda, k))
}
