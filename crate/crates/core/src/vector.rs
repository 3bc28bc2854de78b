//! Dense vectors with exact (exhaustive) cosine top-k.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::model::ScoredChunk;
use crate::topk::top_k_by;

fn norm<T: Copy + Into<f64>>(v: &[T]) -> f64 {
    libm::sqrt(v.iter().map(|&x| x.into() * x.into()).sum())
}

fn dot<A: Copy + Into<f64>, B: Copy + Into<f64>>(a: &[A], b: &[B]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| x.into() * y.into()).sum()
}

/// `(a·b) / (‖a‖‖b‖)`, clamped to `[-1, 1]`.
pub fn cosine<T: Copy + Into<f64>>(a: &[T], b: &[T]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            found: b.len(),
        });
    }
    let (na, nb) = (norm(a), norm(b));
    if na == 0.0 || nb == 0.0 {
        return Err(Error::DegenerateVector);
    }
    Ok((dot(a, b) / (na * nb)).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct VectorRecord {
    pub chunk_id: String,
    pub vector: Vec<f32>,
    norm: f64,
}

impl VectorRecord {
    pub fn new(chunk_id: impl Into<String>, vector: Vec<f32>) -> Self {
        let norm = norm(&vector);
        Self {
            chunk_id: chunk_id.into(),
            vector,
            norm,
        }
    }

    pub fn norm(&self) -> f64 {
        self.norm
    }
}

/// One collection of uniformly sized vectors, in insertion order.
#[derive(Debug, Clone, Default)]
pub struct VectorIndex {
    dim: Option<usize>,
    records: Vec<VectorRecord>,
    ids: BTreeMap<String, usize>,
}

impl VectorIndex {
    pub fn new() -> Self {
        Self::default()
    }

    /// The first insert fixes the collection dimension.
    pub fn add(&mut self, record: VectorRecord) -> Result<()> {
        if let Some(dim) = self.dim {
            if record.vector.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: record.vector.len(),
                });
            }
        }
        if self.ids.contains_key(&record.chunk_id) {
            return Err(Error::DuplicateId(record.chunk_id));
        }
        if record.norm == 0.0 || !record.norm.is_finite() {
            return Err(Error::DegenerateVector);
        }
        self.dim = Some(record.vector.len());
        self.ids.insert(record.chunk_id.clone(), self.records.len());
        self.records.push(record);
        Ok(())
    }

    pub fn dim(&self) -> Option<usize> {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, chunk_id: &str) -> Option<&VectorRecord> {
        self.ids.get(chunk_id).map(|&i| &self.records[i])
    }

    pub fn records(&self) -> &[VectorRecord] {
        &self.records
    }

    /// Exhaustive cosine scan over admitted records. Descending similarity,
    /// ties by ascending chunk id. An empty collection yields no results.
    pub fn search<T: Copy + Into<f64>>(
        &self,
        query: &[T],
        k: usize,
        admit: &dyn Fn(&str) -> bool,
    ) -> Result<Vec<ScoredChunk>> {
        let Some(dim) = self.dim else {
            return Ok(Vec::new());
        };
        if query.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: query.len(),
            });
        }
        let qn = norm(query);
        if qn == 0.0 {
            return Err(Error::DegenerateVector);
        }
        let candidates = self.records.iter().filter(|r| admit(&r.chunk_id)).map(|r| {
            let sim = (dot(query, &r.vector) / (qn * r.norm)).clamp(-1.0, 1.0);
            (r.chunk_id.clone(), sim, ())
        });
        Ok(top_k_by(candidates, k)
            .into_iter()
            .enumerate()
            .map(|(i, (id, s, ()))| {
                let mut sc = ScoredChunk::new(id, i + 1);
                sc.dense_score = Some(s);
                sc
            })
            .collect())
    }
}
