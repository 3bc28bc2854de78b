//! Inverted index with BM25 ranking and a reference TF-IDF scorer.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Chunk, Collection, ScoredChunk};
use crate::text::analyze;
use crate::topk::top_k_by;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bm25Params {
    /// Term-frequency saturation.
    pub k1: f64,
    /// Length normalization strength in `[0, 1]`.
    pub b: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Self { k1: 1.5, b: 0.75 }
    }
}

impl Bm25Params {
    pub fn validate(&self) -> Result<()> {
        if self.k1.is_nan() || self.k1 < 0.0 || !(0.0..=1.0).contains(&self.b) {
            return Err(Error::InvalidParams("bm25 requires k1 >= 0 and b in [0, 1]".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Posting {
    row: u32,
    freq: u32,
}

/// Corpus statistics and postings over one text field.
#[derive(Debug, Clone)]
pub struct LexicalIndex {
    chunk_ids: Vec<String>,
    rows: BTreeMap<String, u32>,
    doc_len: Vec<u32>,
    total_len: u64,
    /// Postings sorted by row.
    postings: BTreeMap<String, Vec<Posting>>,
}

impl LexicalIndex {
    /// Indexes the chosen field of every chunk.
    pub fn build(chunks: &[Chunk], collection: Collection) -> Result<Self> {
        Self::from_texts(chunks.iter().map(|c| (c.chunk_id.as_str(), c.field_text(collection))))
    }

    pub fn from_texts<'a, I>(docs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (&'a str, &'a str)>,
    {
        let mut index = Self {
            chunk_ids: Vec::new(),
            rows: BTreeMap::new(),
            doc_len: Vec::new(),
            total_len: 0,
            postings: BTreeMap::new(),
        };
        for (id, text) in docs {
            let row = index.chunk_ids.len() as u32;
            if index.rows.insert(String::from(id), row).is_some() {
                return Err(Error::DuplicateId(String::from(id)));
            }
            index.chunk_ids.push(String::from(id));
            let tokens = analyze(text);
            index.doc_len.push(tokens.len() as u32);
            index.total_len += tokens.len() as u64;
            let mut counts: BTreeMap<String, u32> = BTreeMap::new();
            for t in tokens {
                *counts.entry(t).or_default() += 1;
            }
            for (term, freq) in counts {
                index.postings.entry(term).or_default().push(Posting { row, freq });
            }
        }
        if index.chunk_ids.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        Ok(index)
    }

    /// Number of indexed chunks (`N`).
    pub fn num_docs(&self) -> usize {
        self.chunk_ids.len()
    }

    pub fn avgdl(&self) -> f64 {
        self.total_len as f64 / self.chunk_ids.len() as f64
    }

    pub fn doc_len(&self, chunk_id: &str) -> Option<usize> {
        self.rows.get(chunk_id).map(|&r| self.doc_len[r as usize] as usize)
    }

    /// Number of chunks containing `term` (`n_t`). `term` must already be analyzed.
    pub fn doc_freq(&self, term: &str) -> usize {
        self.postings.get(term).map_or(0, Vec::len)
    }

    /// Raw frequency `f(t, d)`.
    pub fn term_freq(&self, term: &str, chunk_id: &str) -> usize {
        self.rows
            .get(chunk_id)
            .map_or(0, |&row| self.freq_at(term, row) as usize)
    }

    pub fn terms(&self) -> impl Iterator<Item = &str> {
        self.postings.keys().map(String::as_str)
    }

    pub fn chunk_ids(&self) -> &[String] {
        &self.chunk_ids
    }

    fn freq_at(&self, term: &str, row: u32) -> u32 {
        self.postings.get(term).map_or(0, |list| {
            list.binary_search_by_key(&row, |p| p.row).map_or(0, |i| list[i].freq)
        })
    }

    fn row(&self, chunk_id: &str) -> Result<u32> {
        self.rows
            .get(chunk_id)
            .copied()
            .ok_or_else(|| Error::UnknownChunk(String::from(chunk_id)))
    }

    /// `ln((N - n_t + 0.5) / (n_t + 0.5) + 1)`, always positive.
    pub fn bm25_idf(&self, term: &str) -> f64 {
        let n = self.num_docs() as f64;
        let nt = self.doc_freq(term) as f64;
        libm::log((n - nt + 0.5) / (nt + 0.5) + 1.0)
    }

    fn bm25_term(&self, params: &Bm25Params, idf: f64, freq: u32, len: u32, avgdl: f64) -> f64 {
        let f = freq as f64;
        let norm = 1.0 - params.b + params.b * len as f64 / avgdl;
        idf * (f * (params.k1 + 1.0)) / (f + params.k1 * norm)
    }

    /// BM25 of `query` against one chunk. Each query token contributes once per
    /// occurrence in the query; unseen terms contribute 0.
    pub fn bm25_score(&self, params: &Bm25Params, query: &str, chunk_id: &str) -> Result<f64> {
        let row = self.row(chunk_id)?;
        let len = self.doc_len[row as usize];
        let avgdl = self.avgdl();
        let mut score = 0.0;
        for term in analyze(query) {
            let freq = self.freq_at(&term, row);
            if freq > 0 {
                score += self.bm25_term(params, self.bm25_idf(&term), freq, len, avgdl);
            }
        }
        Ok(score)
    }

    /// `ln(N / (n_t + 1))`; negative for terms in nearly every chunk.
    pub fn tfidf_idf(&self, term: &str) -> f64 {
        libm::log(self.num_docs() as f64 / (self.doc_freq(term) as f64 + 1.0))
    }

    /// Σ over query tokens of `f(t,d)/|d| · ln(N/(n_t+1))`.
    pub fn tfidf_score(&self, query: &str, chunk_id: &str) -> Result<f64> {
        let row = self.row(chunk_id)?;
        let len = self.doc_len[row as usize];
        if len == 0 {
            return Ok(0.0);
        }
        let mut score = 0.0;
        for term in analyze(query) {
            let freq = self.freq_at(&term, row);
            if freq > 0 {
                score += freq as f64 / len as f64 * self.tfidf_idf(&term);
            }
        }
        Ok(score)
    }

    /// Top-`k` chunks containing at least one query term and admitted by
    /// `admit`, by descending BM25 then ascending chunk id.
    pub fn search(&self, params: &Bm25Params, query: &str, k: usize, admit: &dyn Fn(&str) -> bool) -> Vec<ScoredChunk> {
        let avgdl = self.avgdl();
        let mut scores: BTreeMap<u32, f64> = BTreeMap::new();
        // query order is kept so sums round exactly like bm25_score
        for term in analyze(query) {
            let Some(list) = self.postings.get(&term) else {
                continue;
            };
            let idf = self.bm25_idf(&term);
            for p in list {
                let len = self.doc_len[p.row as usize];
                *scores.entry(p.row).or_insert(0.0) += self.bm25_term(params, idf, p.freq, len, avgdl);
            }
        }
        let candidates = scores.into_iter().filter_map(|(row, s)| {
            let id = &self.chunk_ids[row as usize];
            admit(id).then(|| (id.clone(), s, ()))
        });
        top_k_by(candidates, k)
            .into_iter()
            .enumerate()
            .map(|(i, (id, s, ()))| {
                let mut sc = ScoredChunk::new(id, i + 1);
                sc.sparse_score = Some(s);
                sc
            })
            .collect()
    }
}
