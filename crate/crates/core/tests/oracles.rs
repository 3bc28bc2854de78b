//! Implementations checked against independent brute-force oracles.

use metarag_core::chunker::{self, ChunkingParams};
use metarag_core::expansion;
use metarag_core::hybrid::{fuse, HybridParams};
use metarag_core::lexical::{Bm25Params, LexicalIndex};
use metarag_core::rerank::{metadata_rerank, RerankWeights};
use metarag_core::vector::{cosine, VectorIndex, VectorRecord};
use metarag_core::{Chunk, ChunkMetadata, Document, ScoredChunk};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const VOCAB: &[&str] = &[
    "cash",
    "flow",
    "revenue",
    "growth",
    "capex",
    "margin",
    "debt",
    "equity",
    "dividend",
    "segment",
    "risk",
    "tax",
    "lease",
    "goodwill",
    "inventory",
];

fn random_corpus(rng: &mut ChaCha8Rng, n: usize) -> Vec<(String, String)> {
    (0..n)
        .map(|i| {
            let len = rng.gen_range(1..12);
            let text: Vec<&str> = (0..len).map(|_| *VOCAB.choose(rng).unwrap()).collect();
            (format!("c{i:02}"), text.join(" "))
        })
        .collect()
}

/// Direct evaluation of the BM25 sum from raw token lists.
fn bm25_oracle(corpus: &[(String, String)], k1: f64, b: f64, query: &str, target: usize) -> f64 {
    let docs: Vec<Vec<String>> = corpus
        .iter()
        .map(|(_, t)| t.split_whitespace().map(str::to_lowercase).collect())
        .collect();
    let n = docs.len() as f64;
    let avgdl = docs.iter().map(Vec::len).sum::<usize>() as f64 / n;
    let d = &docs[target];
    let mut score = 0.0;
    for term in query.split_whitespace().map(str::to_lowercase) {
        let f = d.iter().filter(|t| **t == term).count() as f64;
        if f == 0.0 {
            continue;
        }
        let nt = docs.iter().filter(|doc| doc.contains(&term)).count() as f64;
        let idf = ((n - nt + 0.5) / (nt + 0.5) + 1.0).ln();
        score += idf * (f * (k1 + 1.0)) / (f + k1 * (1.0 - b + b * d.len() as f64 / avgdl));
    }
    score
}

fn sort_oracle(mut scored: Vec<(String, f64)>) -> Vec<String> {
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    scored.into_iter().map(|(id, _)| id).collect()
}

#[test]
fn bm25_two_document_hand_value() {
    let idx = LexicalIndex::from_texts([("d1", "cash flow cash"), ("d2", "revenue growth")]).unwrap();
    // IDF' = ln((2 - 1 + 0.5)/(1 + 0.5) + 1) = ln 2; f = 2; |d| = 3; avgdl = 2.5
    let hand = 2f64.ln() * (2.0 * 2.5) / (2.0 + 1.5 * (1.0 - 0.75 + 0.75 * 3.0 / 2.5));
    let got = idx.bm25_score(&Bm25Params::default(), "cash", "d1").unwrap();
    assert!((got - hand).abs() < 1e-12);
    assert!((got - 0.9303).abs() < 1e-4, "{got}");
}

#[test]
fn bm25_matches_oracle_per_chunk() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let corpus = random_corpus(&mut rng, 30);
    let idx = LexicalIndex::from_texts(corpus.iter().map(|(a, b)| (a.as_str(), b.as_str()))).unwrap();
    let p = Bm25Params { k1: 1.2, b: 0.6 };
    for (i, (id, _)) in corpus.iter().enumerate() {
        let q = "cash capex cash risk";
        let got = idx.bm25_score(&p, q, id).unwrap();
        assert!((got - bm25_oracle(&corpus, p.k1, p.b, q, i)).abs() < 1e-12);
    }
}

#[test]
fn sparse_search_equals_brute_force() {
    for seed in 0..100 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let corpus = random_corpus(&mut rng, 30);
        let idx = LexicalIndex::from_texts(corpus.iter().map(|(a, b)| (a.as_str(), b.as_str()))).unwrap();
        let query: Vec<&str> = (0..rng.gen_range(1..4))
            .map(|_| *VOCAB.choose(&mut rng).unwrap())
            .collect();
        let query = query.join(" ");
        let p = Bm25Params::default();
        let oracle = sort_oracle(
            (0..corpus.len())
                .map(|i| (corpus[i].0.clone(), bm25_oracle(&corpus, p.k1, p.b, &query, i)))
                .filter(|(_, s)| *s > 0.0)
                .collect(),
        );
        let got: Vec<String> = idx
            .search(&p, &query, 30, &|_| true)
            .into_iter()
            .map(|s| s.chunk_id)
            .collect();
        assert_eq!(got, oracle, "seed {seed}");
        let k = rng.gen_range(1..10);
        let top: Vec<String> = idx
            .search(&p, &query, k, &|_| true)
            .into_iter()
            .map(|s| s.chunk_id)
            .collect();
        assert_eq!(top, oracle[..k.min(oracle.len())], "seed {seed} k {k}");
    }
}

fn random_unit(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f32> {
    let v: Vec<f32> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let n = v.iter().map(|x| x * x).sum::<f32>().sqrt();
    v.into_iter().map(|x| x / n).collect()
}

#[test]
fn dense_search_equals_full_sort() {
    for seed in 0..50 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let mut idx = VectorIndex::new();
        let vectors: Vec<Vec<f32>> = (0..500).map(|_| random_unit(&mut rng, 16)).collect();
        for (i, v) in vectors.iter().enumerate() {
            idx.add(VectorRecord::new(format!("v{i:03}"), v.clone())).unwrap();
        }
        let q = random_unit(&mut rng, 16);
        let oracle = sort_oracle(
            vectors
                .iter()
                .enumerate()
                .map(|(i, v)| (format!("v{i:03}"), cosine(&q, v).unwrap()))
                .collect(),
        );
        for k in [1, 7, 25] {
            let got: Vec<String> = idx
                .search(&q, k, &|_| true)
                .unwrap()
                .into_iter()
                .map(|s| s.chunk_id)
                .collect();
            assert_eq!(got, oracle[..k], "seed {seed} k {k}");
        }
        // filtered search == search over the admitted subset
        let admit = |id: &str| id.ends_with('3') || id.ends_with('7');
        let got: Vec<String> = idx
            .search(&q, 25, &admit)
            .unwrap()
            .into_iter()
            .map(|s| s.chunk_id)
            .collect();
        let expected: Vec<String> = oracle.iter().filter(|id| admit(id)).take(25).cloned().collect();
        assert_eq!(got, expected);
    }
}

#[test]
fn hybrid_endpoints_reproduce_single_scorers() {
    for seed in 0..20 {
        let mut rng = ChaCha8Rng::seed_from_u64(500 + seed);
        let corpus = random_corpus(&mut rng, 40);
        let lex = LexicalIndex::from_texts(corpus.iter().map(|(a, b)| (a.as_str(), b.as_str()))).unwrap();
        let mut vecs = VectorIndex::new();
        for (id, _) in &corpus {
            vecs.add(VectorRecord::new(id.clone(), random_unit(&mut rng, 8)))
                .unwrap();
        }
        let qv = random_unit(&mut rng, 8);
        let params = HybridParams::default();
        let dense = vecs.search(&qv, params.candidate_pool, &|_| true).unwrap();
        let sparse = lex.search(
            &Bm25Params::default(),
            "cash risk margin",
            params.candidate_pool,
            &|_| true,
        );

        let union: std::collections::BTreeSet<String> =
            dense.iter().chain(&sparse).map(|s| s.chunk_id.clone()).collect();
        let dmin = dense
            .iter()
            .map(|s| s.dense_score.unwrap())
            .fold(f64::INFINITY, f64::min);
        let smin = sparse
            .iter()
            .map(|s| s.sparse_score.unwrap())
            .fold(f64::INFINITY, f64::min);
        let lookup = |list: &[ScoredChunk], id: &str, pick: fn(&ScoredChunk) -> Option<f64>, min: f64| {
            list.iter().find(|s| s.chunk_id == id).and_then(pick).unwrap_or(min)
        };
        let dense_order = sort_oracle(
            union
                .iter()
                .map(|id| (id.clone(), lookup(&dense, id, |s| s.dense_score, dmin)))
                .collect(),
        );
        let sparse_order = sort_oracle(
            union
                .iter()
                .map(|id| (id.clone(), lookup(&sparse, id, |s| s.sparse_score, smin)))
                .collect(),
        );

        let at = |lambda| -> Vec<String> {
            fuse(&dense, &sparse, lambda, union.len())
                .into_iter()
                .map(|s| s.chunk_id)
                .collect()
        };
        assert_eq!(at(1.0), dense_order, "seed {seed}");
        assert_eq!(at(0.0), sparse_order, "seed {seed}");
        for lambda in [0.0, 0.3, 0.5, 1.0] {
            for s in fuse(&dense, &sparse, lambda, 7) {
                let f = s.fused_score.unwrap();
                assert!((0.0..=1.0).contains(&f));
            }
        }
    }
}

fn meta_chunk(id: &str, clusters: &[&str], entities: &[&str]) -> Chunk {
    Chunk {
        chunk_id: id.to_string(),
        doc_id: id.split('#').next().unwrap().to_string(),
        ordinal: 0,
        start: 0,
        end: 0,
        text: String::new(),
        metadata: ChunkMetadata {
            parent_clusters: clusters.iter().map(|s| s.to_string()).collect(),
            chunk_entities: entities.iter().map(|s| s.to_string()).collect(),
            ..Default::default()
        },
        contextual_text: String::new(),
    }
}

fn rerank_fixture() -> (Vec<Chunk>, Vec<f64>) {
    (
        vec![
            meta_chunk("c1", &["Liquidity", "Legal Proceedings"], &["3M", "PFAS"]),
            meta_chunk("c2", &["Liquidity"], &["3M"]),
            meta_chunk("c3", &["Legal Proceedings"], &["Aearo", "Combat Arms"]),
            meta_chunk("c4", &["Segments"], &[]),
            meta_chunk("c5", &["Liquidity", "Segments"], &["3M", "Aearo"]),
        ],
        vec![0.9, 0.7, 0.5, 0.3, 0.1],
    )
}

const RERANK_QUERY: &str = "How did 3M manage liquidity and PFAS litigation?";

/// Spreadsheet-style evaluation of the four component definitions.
fn component_oracle(query: &str, chunks: &[Chunk], fused: &[f64]) -> Vec<[f64; 4]> {
    let n = chunks.len() as f64;
    let q: Vec<String> = query
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect();
    let (lo, hi) = fused
        .iter()
        .fold((f64::MAX, f64::MIN), |(l, h), &x| (l.min(x), h.max(x)));
    chunks
        .iter()
        .zip(fused)
        .map(|(c, &f)| {
            let share = |labels: &[String], of: fn(&Chunk) -> &[String]| -> f64 {
                if labels.is_empty() {
                    return 0.0;
                }
                labels
                    .iter()
                    .map(|l| chunks.iter().filter(|s| of(s).contains(l)).count() as f64 / n)
                    .sum::<f64>()
                    / labels.len() as f64
            };
            let ef = share(&c.metadata.chunk_entities, |s| &s.metadata.chunk_entities);
            let cc = share(&c.metadata.parent_clusters, |s| &s.metadata.parent_clusters);
            let eq = if c.metadata.chunk_entities.is_empty() {
                0.0
            } else {
                c.metadata
                    .chunk_entities
                    .iter()
                    .filter(|e| {
                        let toks: Vec<String> = e.split_whitespace().map(str::to_lowercase).collect();
                        q.windows(toks.len()).any(|w| w == toks.as_slice())
                    })
                    .count() as f64
                    / c.metadata.chunk_entities.len() as f64
            };
            let ret = (f - lo) / (hi - lo);
            [ef, cc, eq, ret]
        })
        .collect()
}

fn candidates<'a>(chunks: &'a [Chunk], fused: &[f64]) -> Vec<(ScoredChunk, &'a Chunk)> {
    chunks
        .iter()
        .zip(fused)
        .enumerate()
        .map(|(i, (c, &f))| {
            let mut s = ScoredChunk::new(c.chunk_id.clone(), i + 1);
            s.fused_score = Some(f);
            (s, c)
        })
        .collect()
}

#[test]
fn metadata_rerank_matches_component_oracle() {
    let (chunks, fused) = rerank_fixture();
    let oracle = component_oracle(RERANK_QUERY, &chunks, &fused);
    let out = metadata_rerank(RERANK_QUERY, &candidates(&chunks, &fused), &RerankWeights::default(), 5).unwrap();
    for r in &out {
        let i = chunks.iter().position(|c| c.chunk_id == r.chunk_id).unwrap();
        let c = r.rerank_components.unwrap();
        let got = [c.entity_freq, c.cluster_coherence, c.entity_query, c.retrieval];
        for (g, o) in got.iter().zip(oracle[i]) {
            assert!((g - o).abs() < 1e-9);
        }
        let composite: f64 = oracle[i].iter().sum::<f64>() / 4.0;
        assert!((r.rerank_score.unwrap() - composite).abs() < 1e-9);
    }
    // frozen hand values
    let ids: Vec<&str> = out.iter().map(|s| s.chunk_id.as_str()).collect();
    assert_eq!(ids, ["c2", "c1", "c5", "c3", "c4"]);
    let scores: Vec<f64> = out.iter().map(|s| s.rerank_score.unwrap()).collect();
    for (g, e) in scores.iter().zip([0.7375, 0.725, 0.375, 0.3, 0.1625]) {
        assert!((g - e).abs() < 1e-12);
    }
}

#[test]
fn retrieval_only_weights_keep_input_order() {
    let (chunks, fused) = rerank_fixture();
    let w = RerankWeights::new(0.0, 0.0, 0.0, 1.0).unwrap();
    let out = metadata_rerank(RERANK_QUERY, &candidates(&chunks, &fused), &w, 5).unwrap();
    let ids: Vec<&str> = out.iter().map(|s| s.chunk_id.as_str()).collect();
    assert_eq!(ids, ["c1", "c2", "c3", "c4", "c5"]);
}

#[test]
fn metadata_rerank_is_permutation_invariant() {
    let (chunks, fused) = rerank_fixture();
    let base = metadata_rerank(RERANK_QUERY, &candidates(&chunks, &fused), &RerankWeights::default(), 5).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for _ in 0..20 {
        let mut cands = candidates(&chunks, &fused);
        cands.shuffle(&mut rng);
        let out = metadata_rerank(RERANK_QUERY, &cands, &RerankWeights::default(), 5).unwrap();
        assert_eq!(out, base);
    }
}

#[test]
fn removing_a_candidate_only_moves_set_level_components() {
    let (chunks, fused) = rerank_fixture();
    let full = metadata_rerank(RERANK_QUERY, &candidates(&chunks, &fused), &RerankWeights::default(), 5).unwrap();
    let reduced = metadata_rerank(
        RERANK_QUERY,
        &candidates(&chunks[..4], &fused[..4]),
        &RerankWeights::default(),
        4,
    )
    .unwrap();
    let comp = |list: &[ScoredChunk], id: &str| {
        list.iter()
            .find(|s| s.chunk_id == id)
            .unwrap()
            .rerank_components
            .unwrap()
    };
    for id in ["c1", "c2", "c3", "c4"] {
        assert_eq!(comp(&full, id).entity_query, comp(&reduced, id).entity_query);
    }
    // c2 shares 3M with c5, so dropping c5 changes its entity share
    assert_ne!(comp(&full, "c2").entity_freq, comp(&reduced, "c2").entity_freq);
    assert_ne!(
        comp(&full, "c4").cluster_coherence,
        comp(&reduced, "c4").cluster_coherence
    );
}

fn expansion_fixture() -> Vec<Chunk> {
    vec![
        meta_chunk("a#0", &["Liquidity", "Debt"], &["3M", "Notes"]),
        meta_chunk("a#1", &["Liquidity"], &["3M"]),
        meta_chunk("a#2", &["Liquidity", "Risk"], &["Aearo"]),
        meta_chunk("a#3", &["Debt"], &["3M", "Aearo"]),
        meta_chunk("a#4", &["Segments"], &["3M"]),
        meta_chunk("a#5", &["Liquidity"], &[]),
        meta_chunk("b#0", &["Liquidity", "Debt"], &["3M"]),
        meta_chunk("b#1", &["Risk"], &["PFAS"]),
        meta_chunk("b#2", &["Segments"], &["Scotch"]),
        meta_chunk("b#3", &["Liquidity"], &["3M", "Notes"]),
    ]
}

#[test]
fn expansion_equals_enumeration_oracle() {
    let corpus = expansion_fixture();
    let seeds: Vec<&Chunk> = corpus[..3].iter().collect();
    // oracle: count labels per seed, keep the maximal ones, count matches per chunk
    let core = |of: fn(&Chunk) -> &Vec<String>| -> Vec<String> {
        let mut counts: std::collections::BTreeMap<String, usize> = Default::default();
        for s in &seeds {
            for l in of(s) {
                *counts.entry(l.to_lowercase()).or_default() += 1;
            }
        }
        let max = counts.values().copied().max().unwrap_or(0);
        counts.into_iter().filter(|(_, n)| *n == max).map(|(l, _)| l).collect()
    };
    let core_clusters = core(|c| &c.metadata.parent_clusters);
    let core_entities = core(|c| &c.metadata.chunk_entities);
    assert_eq!(core_clusters, ["liquidity"]);
    assert_eq!(core_entities, ["3m"]);
    let mut scored: Vec<(String, f64)> = corpus[3..]
        .iter()
        .map(|c| {
            let n = c
                .metadata
                .parent_clusters
                .iter()
                .filter(|l| core_clusters.contains(&l.to_lowercase()))
                .count()
                + c.metadata
                    .chunk_entities
                    .iter()
                    .filter(|l| core_entities.contains(&l.to_lowercase()))
                    .count();
            (c.chunk_id.clone(), n as f64)
        })
        .filter(|(_, n)| *n > 0.0)
        .collect();
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    let oracle: Vec<String> = scored.into_iter().map(|(id, _)| id).collect();

    for k in 1..=8 {
        let got: Vec<String> = expansion::expand(&seeds, &corpus, k, &|_| true)
            .into_iter()
            .map(|c| c.chunk_id.clone())
            .collect();
        assert_eq!(got, oracle[..k.min(oracle.len())]);
    }
    assert_eq!(oracle[..3], ["b#0", "b#3", "a#3"]);

    let only_a: Vec<String> = expansion::expand(&seeds, &corpus, 3, &|c| c.doc_id == "a")
        .into_iter()
        .map(|c| c.chunk_id.clone())
        .collect();
    assert_eq!(only_a, ["a#3", "a#4", "a#5"]);
}

fn heading_document() -> (String, Vec<usize>) {
    // four sections of 880, 880, 880 and 360 tokens, ~3000 tokens in total
    let mut text = String::new();
    let mut word = 0usize;
    for (s, size) in [880usize, 880, 880, 360].into_iter().enumerate() {
        text.push_str(&format!("# Section {s}\n\n"));
        let mut remaining = size - 3;
        while remaining > 0 {
            let para = remaining.min(97);
            for w in 0..para {
                text.push_str(&format!("w{word}"));
                word += 1;
                text.push_str(if w % 12 == 11 { ". " } else { " " });
            }
            text.push_str("\n\n");
            remaining -= para;
        }
    }
    // oracle: scan for heading starts and blank-line ends
    let bytes = text.as_bytes();
    let mut seps = Vec::new();
    for p in 1..text.len() {
        let heading = bytes[p - 1] == b'\n' && bytes[p] == b'#';
        let blank = p >= 2 && bytes[p - 1] == b'\n' && bytes[p - 2] == b'\n' && bytes[p] != b'\n';
        if heading || blank {
            seps.push(p);
        }
    }
    (text, seps)
}

#[test]
fn chunk_boundaries_follow_headings() {
    let (text, seps) = heading_document();
    assert_eq!(chunker::token_count(&text), 3000);
    let doc = Document {
        doc_id: "h".into(),
        file_name: "h.md".into(),
        markdown_text: text.clone(),
        source_period: None,
    };
    let chunks = chunker::split(&doc, &ChunkingParams::default()).unwrap();
    assert_eq!(chunks.len(), 4);
    for c in &chunks {
        assert!(c.end == text.len() || seps.contains(&c.end), "end {}", c.end);
        assert!(c.start == 0 || seps.contains(&c.start), "start {}", c.start);
        assert!(chunker::token_count(&c.text) <= 1000);
    }
}

#[test]
fn two_budgets_of_prose_partition_exactly() {
    let text: String = (0..2000)
        .map(|i| format!("word{i}{}", if i % 10 == 9 { ". " } else { " " }))
        .collect();
    let doc = Document {
        doc_id: "p".into(),
        file_name: "p.md".into(),
        markdown_text: text.clone(),
        source_period: None,
    };
    let chunks = chunker::split(&doc, &ChunkingParams::new(1000, 0)).unwrap();
    assert_eq!(chunks.len(), 2);
    assert_eq!(chunks[0].end, chunks[1].start);
    assert_eq!(format!("{}{}", chunks[0].text, chunks[1].text), text);
    assert_eq!(chunker::token_count(&chunks[0].text), 1000);
}

#[test]
fn oversized_sections_split_at_paragraphs_with_overlap() {
    let mut text = String::from("# Big\n\n");
    for p in 0..30 {
        for w in 0..40 {
            text.push_str(&format!("p{p}w{w} "));
        }
        text.push_str("\n\n");
    }
    let doc = Document {
        doc_id: "b".into(),
        file_name: "b.md".into(),
        markdown_text: text.clone(),
        source_period: None,
    };
    let params = ChunkingParams::new(300, 30);
    let chunks = chunker::split(&doc, &params).unwrap();
    assert!(chunks.len() > 3);
    for w in chunks.windows(2) {
        let shared = &text[w[1].start..w[0].end];
        let n = chunker::token_count(shared);
        assert!((1..=30).contains(&n), "overlap {n}");
        // split points land after blank lines
        assert!(text[..w[0].end].ends_with("\n\n"));
    }
}
