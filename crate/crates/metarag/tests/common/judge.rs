//! Hand-labeled evaluator fixtures over a three-chunk corpus, and a
//! brute-force containment oracle for the mock judge.

use std::collections::BTreeSet;

use metarag::enrichment::build_from_documents;
use metarag::eval::QaExample;
use metarag::gateway::Gateway;
use metarag::pipeline::AnswerTrace;
use metarag::store::Index;
use metarag_core::metrics::{AnswerClaimVerdict, ClaimVerdicts, GtClaimVerdict};
use metarag_core::{Document, ScoredChunk};

pub const DOCS: [(&str, &str); 3] = [
    (
        "ALPHA",
        "Alpha Foods revenue reached 12 billion dollars in 2018. Capital spending totaled 900 million dollars.",
    ),
    (
        "BETA",
        "Beta Retail opened 40 stores during 2022. Pet sales grew 9 percent.",
    ),
    (
        "GAMMA",
        "Gamma Energy recorded a net loss in 2023. Debt rose to 5 billion dollars.",
    ),
];

pub fn judge_index(gw: &Gateway) -> Index {
    let docs: Vec<Document> = DOCS
        .iter()
        .map(|(id, text)| Document {
            doc_id: id.to_string(),
            file_name: format!("{id}.md"),
            markdown_text: text.to_string(),
            source_period: None,
        })
        .collect();
    build_from_documents(gw, &docs, &[], &super::options()).unwrap()
}

pub struct Labeled {
    pub answer: &'static str,
    pub context: &'static [&'static str],
    pub ground_truth: &'static str,
    pub answer_claims: &'static [&'static str],
    pub gt_claims: &'static [&'static str],
    /// (entailed by ground truth, entailed by context) per answer claim
    pub answer_labels: &'static [(bool, bool)],
    /// (entailed by answer, entailed by context) per ground-truth claim
    pub gt_labels: &'static [(bool, bool)],
    pub chunk_labels: &'static [bool],
}

impl Labeled {
    pub fn example(&self, i: usize) -> QaExample {
        QaExample {
            id: format!("h{i}"),
            question: "fixture question".into(),
            ground_truth_answer: self.ground_truth.into(),
            evidence_doc_ids: None,
            evidence_strings: None,
        }
    }

    pub fn trace(&self) -> AnswerTrace {
        AnswerTrace {
            config: "fixture".into(),
            original_query: "fixture question".into(),
            rewritten_query: None,
            selected_files: None,
            reranker_input: None,
            retrieved: self
                .context
                .iter()
                .enumerate()
                .map(|(i, id)| ScoredChunk::new(*id, i + 1))
                .collect(),
            expansion_added: None,
            answer_text: self.answer.into(),
            stages: Vec::new(),
            total_latency_seconds: 0.0,
            warnings: Vec::new(),
        }
    }

    pub fn labeled_verdicts(&self) -> ClaimVerdicts {
        ClaimVerdicts {
            answer_claims: self
                .answer_labels
                .iter()
                .map(|&(g, c)| AnswerClaimVerdict {
                    entailed_by_gt: g,
                    entailed_by_context: c,
                })
                .collect(),
            gt_claims: self
                .gt_labels
                .iter()
                .map(|&(a, c)| GtClaimVerdict {
                    entailed_by_answer: a,
                    entailed_by_context: c,
                })
                .collect(),
            chunk_relevant: self.chunk_labels.to_vec(),
        }
    }
}

pub const FIXTURES: [Labeled; 10] = [
    Labeled {
        answer: "Alpha Foods revenue reached 12 billion dollars in 2018.",
        context: &["ALPHA#0"],
        ground_truth: "Alpha Foods revenue reached 12 billion dollars in 2018.",
        answer_claims: &["Alpha Foods revenue reached 12 billion dollars in 2018"],
        gt_claims: &["Alpha Foods revenue reached 12 billion dollars in 2018"],
        answer_labels: &[(true, true)],
        gt_labels: &[(true, true)],
        chunk_labels: &[true],
    },
    Labeled {
        answer: "Alpha Foods revenue reached 15 billion dollars.",
        context: &["ALPHA#0"],
        ground_truth: "Alpha Foods revenue reached 12 billion dollars.",
        answer_claims: &["Alpha Foods revenue reached 15 billion dollars"],
        gt_claims: &["Alpha Foods revenue reached 12 billion dollars"],
        answer_labels: &[(false, false)],
        gt_labels: &[(false, true)],
        chunk_labels: &[true],
    },
    Labeled {
        answer: "Beta Retail opened 40 stores. Pet sales grew 9 percent.",
        context: &["BETA#0", "ALPHA#0"],
        ground_truth: "Beta Retail opened 40 stores.",
        answer_claims: &["Beta Retail opened 40 stores", "Pet sales grew 9 percent"],
        gt_claims: &["Beta Retail opened 40 stores"],
        answer_labels: &[(true, true), (false, true)],
        gt_labels: &[(true, true)],
        chunk_labels: &[true, false],
    },
    Labeled {
        answer: "Gamma Energy recorded a net loss. Debt fell sharply.",
        context: &["GAMMA#0"],
        ground_truth: "Gamma Energy recorded a net loss in 2023. Debt rose to 5 billion dollars.",
        answer_claims: &["Gamma Energy recorded a net loss", "Debt fell sharply"],
        gt_claims: &[
            "Gamma Energy recorded a net loss in 2023",
            "Debt rose to 5 billion dollars",
        ],
        answer_labels: &[(true, true), (false, false)],
        gt_labels: &[(false, true), (false, true)],
        chunk_labels: &[true],
    },
    Labeled {
        answer: "The provided context does not contain the answer.",
        context: &["BETA#0"],
        ground_truth: "Alpha Foods revenue reached 12 billion dollars.",
        answer_claims: &["The provided context does not contain the answer"],
        gt_claims: &["Alpha Foods revenue reached 12 billion dollars"],
        answer_labels: &[(false, false)],
        gt_labels: &[(false, false)],
        chunk_labels: &[false],
    },
    Labeled {
        answer: "Alpha Foods revenue reached 12 billion dollars.",
        context: &[],
        ground_truth: "Alpha Foods revenue reached 12 billion dollars.",
        answer_claims: &["Alpha Foods revenue reached 12 billion dollars"],
        gt_claims: &["Alpha Foods revenue reached 12 billion dollars"],
        answer_labels: &[(true, false)],
        gt_labels: &[(true, false)],
        chunk_labels: &[],
    },
    Labeled {
        answer: "However, capital spending totaled 900 million dollars.",
        context: &["ALPHA#0"],
        ground_truth:
            "Capital spending totaled 900 million dollars. Alpha Foods revenue reached 12 billion dollars in 2018.",
        answer_claims: &["capital spending totaled 900 million dollars"],
        gt_claims: &[
            "Capital spending totaled 900 million dollars",
            "Alpha Foods revenue reached 12 billion dollars in 2018",
        ],
        answer_labels: &[(true, true)],
        gt_labels: &[(true, true), (false, true)],
        chunk_labels: &[true],
    },
    Labeled {
        answer: "Beta Retail opened 40 stores. Gamma Energy recorded a net loss.",
        context: &["BETA#0", "GAMMA#0"],
        ground_truth: "Beta Retail opened 40 stores. Gamma Energy recorded a net loss.",
        answer_claims: &["Beta Retail opened 40 stores", "Gamma Energy recorded a net loss"],
        gt_claims: &["Beta Retail opened 40 stores", "Gamma Energy recorded a net loss"],
        answer_labels: &[(true, true), (true, true)],
        gt_labels: &[(true, true), (true, true)],
        chunk_labels: &[true, true],
    },
    Labeled {
        answer: "",
        context: &["ALPHA#0"],
        ground_truth: "Capital spending totaled 900 million dollars.",
        answer_claims: &[],
        gt_claims: &["Capital spending totaled 900 million dollars"],
        answer_labels: &[],
        gt_labels: &[(false, true)],
        chunk_labels: &[true],
    },
    Labeled {
        answer: "Pet sales grew by 9 percent in 2022.",
        context: &["BETA#0"],
        ground_truth: "Pet sales grew 9 percent.",
        answer_claims: &["Pet sales grew by 9 percent in 2022"],
        gt_claims: &["Pet sales grew 9 percent"],
        answer_labels: &[(false, true)],
        gt_labels: &[(true, true)],
        chunk_labels: &[true],
    },
];

const ORACLE_STOPWORDS: &str = "a an and are as at be been by did do does for from had has have in is it its of on or \
    that the their this to was were what which while who will with how than s";

fn words(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// Containment entailment: every non-stopword of the claim appears in the
/// premise (all words when the claim has only stopwords).
pub fn oracle_entails(premise: &str, claim: &str) -> bool {
    let stop: BTreeSet<&str> = ORACLE_STOPWORDS.split_whitespace().collect();
    let have: BTreeSet<String> = words(premise).into_iter().collect();
    let all = words(claim);
    let content: Vec<&String> = all.iter().filter(|w| !stop.contains(w.as_str())).collect();
    let need: Vec<&String> = if content.is_empty() {
        all.iter().collect()
    } else {
        content
    };
    !need.is_empty() && need.iter().all(|w| have.contains(*w))
}

/// Verdicts from the labeled claim lists by exhaustive pairwise checks.
pub fn oracle_verdicts(f: &Labeled) -> ClaimVerdicts {
    let text_of = |id: &str| DOCS.iter().find(|(d, _)| id.starts_with(d)).map_or("", |(_, t)| *t);
    let context: String = f.context.iter().map(|id| text_of(id)).collect::<Vec<_>>().join(" ");
    ClaimVerdicts {
        answer_claims: f
            .answer_claims
            .iter()
            .map(|a| AnswerClaimVerdict {
                entailed_by_gt: oracle_entails(f.ground_truth, a),
                entailed_by_context: oracle_entails(&context, a),
            })
            .collect(),
        gt_claims: f
            .gt_claims
            .iter()
            .map(|g| GtClaimVerdict {
                entailed_by_answer: oracle_entails(f.answer, g),
                entailed_by_context: oracle_entails(&context, g),
            })
            .collect(),
        chunk_relevant: f
            .context
            .iter()
            .map(|id| f.gt_claims.iter().any(|g| oracle_entails(text_of(id), g)))
            .collect(),
    }
}

/// Builds verdicts with the given claim counts and support counts.
pub fn synthetic(answer: usize, answer_supported: usize, gt: usize, gt_covered: usize) -> ClaimVerdicts {
    ClaimVerdicts {
        answer_claims: (0..answer)
            .map(|i| AnswerClaimVerdict {
                entailed_by_gt: i < answer_supported,
                entailed_by_context: i < answer_supported,
            })
            .collect(),
        gt_claims: (0..gt)
            .map(|i| GtClaimVerdict {
                entailed_by_answer: i < gt_covered,
                entailed_by_context: i < gt_covered,
            })
            .collect(),
        chunk_relevant: vec![true],
    }
}

/// Three examples whose mean per-example F1 differs from the F1 of the mean
/// precision and recall: 35.0 / 52.7 / 32.9 in percent.
pub fn macro_pattern() -> [ClaimVerdicts; 3] {
    [synthetic(2, 1, 8, 1), synthetic(4, 1, 7, 6), synthetic(10, 3, 5, 3)]
}
