//! Metadata-only chunk expansion from a small high-certainty seed set.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use crate::model::Chunk;
use crate::text::normalize_label;
use crate::topk::top_k_by;

/// Labels with maximal per-chunk frequency across `seeds`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CoreConcepts {
    pub clusters: BTreeSet<String>,
    pub entities: BTreeSet<String>,
}

fn most_common<'a, F>(seeds: &[&'a Chunk], labels: F) -> BTreeSet<String>
where
    F: Fn(&'a Chunk) -> &'a [String],
{
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for chunk in seeds {
        let distinct: BTreeSet<String> = labels(chunk)
            .iter()
            .map(|l| normalize_label(l))
            .filter(|l| !l.is_empty())
            .collect();
        for l in distinct {
            *counts.entry(l).or_default() += 1;
        }
    }
    let Some(&top) = counts.values().max() else {
        return BTreeSet::new();
    };
    counts.into_iter().filter(|&(_, n)| n == top).map(|(l, _)| l).collect()
}

pub fn core_concepts(seeds: &[&Chunk]) -> CoreConcepts {
    CoreConcepts {
        clusters: most_common(seeds, |c| &c.metadata.parent_clusters),
        entities: most_common(seeds, |c| &c.metadata.chunk_entities),
    }
}

/// Number of core clusters plus core entities carried by `chunk`.
pub fn concept_matches(core: &CoreConcepts, chunk: &Chunk) -> usize {
    let count = |core: &BTreeSet<String>, labels: &[String]| {
        let own: BTreeSet<String> = labels.iter().map(|l| normalize_label(l)).collect();
        own.intersection(core).count()
    };
    count(&core.clusters, &chunk.metadata.parent_clusters) + count(&core.entities, &chunk.metadata.chunk_entities)
}

/// Chunks outside `seeds` sharing any core cluster or entity, admitted by
/// `admit`, ordered by match count (descending) then chunk id; at most
/// `expand_k`.
pub fn expand<'a>(
    seeds: &[&Chunk],
    corpus: &'a [Chunk],
    expand_k: usize,
    admit: &dyn Fn(&Chunk) -> bool,
) -> Vec<&'a Chunk> {
    let core = core_concepts(seeds);
    if core.clusters.is_empty() && core.entities.is_empty() {
        return Vec::new();
    }
    let seen: BTreeSet<&str> = seeds.iter().map(|c| c.chunk_id.as_str()).collect();
    let candidates = corpus
        .iter()
        .filter(|c| !seen.contains(c.chunk_id.as_str()) && admit(c))
        .filter_map(|c| {
            let n = concept_matches(&core, c);
            (n > 0).then(|| (c.chunk_id.clone(), n as f64, c))
        });
    top_k_by(candidates, expand_k).into_iter().map(|(_, _, c)| c).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ChunkMetadata;
    use alloc::string::ToString;
    use alloc::vec;

    fn chunk(id: &str, clusters: &[&str], entities: &[&str]) -> Chunk {
        Chunk {
            chunk_id: id.to_string(),
            doc_id: "d".to_string(),
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

    #[test]
    fn unique_shared_cluster_is_found() {
        let corpus = vec![
            chunk("a", &["Liquidity"], &[]),
            chunk("b", &["Liquidity"], &[]),
            chunk("c", &["Segments"], &[]),
            chunk("d", &["Liquidity", "Debt"], &[]),
        ];
        let seeds = [&corpus[0], &corpus[1]];
        let out = expand(&seeds, &corpus, 3, &|_| true);
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].chunk_id, "d");
    }

    #[test]
    fn nothing_shared_means_no_expansion() {
        let corpus = vec![chunk("a", &["X"], &["E"]), chunk("b", &["Y"], &["F"])];
        assert!(expand(&[&corpus[0]], &corpus, 3, &|_| true).is_empty());
    }

    #[test]
    fn ties_at_the_top_are_all_core() {
        let corpus = [chunk("a", &["X", "Y"], &[]), chunk("b", &["X", "Y"], &[])];
        let core = core_concepts(&[&corpus[0], &corpus[1]]);
        assert_eq!(core.clusters.len(), 2);
        assert!(core.entities.is_empty());
    }
}
