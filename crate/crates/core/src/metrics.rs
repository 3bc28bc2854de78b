//! Claim-level answer and retrieval metrics computed from entailment verdicts.

use alloc::string::String;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnswerClaimVerdict {
    pub entailed_by_gt: bool,
    pub entailed_by_context: bool,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GtClaimVerdict {
    pub entailed_by_answer: bool,
    pub entailed_by_context: bool,
}

/// Everything the seven metrics are derived from.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClaimVerdicts {
    pub answer_claims: Vec<AnswerClaimVerdict>,
    pub gt_claims: Vec<GtClaimVerdict>,
    /// Per retrieved chunk: entails at least one ground-truth claim.
    pub chunk_relevant: Vec<bool>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub claim_recall: f64,
    pub context_precision: f64,
    pub faithfulness: f64,
    pub hallucination: f64,
}

impl Metrics {
    pub const NAMES: [&'static str; 7] = [
        "precision",
        "recall",
        "f1",
        "claim_recall",
        "context_precision",
        "faithfulness",
        "hallucination",
    ];

    pub fn values(&self) -> [f64; 7] {
        [
            self.precision,
            self.recall,
            self.f1,
            self.claim_recall,
            self.context_precision,
            self.faithfulness,
            self.hallucination,
        ]
    }

    fn from_values(v: [f64; 7]) -> Self {
        Self {
            precision: v[0],
            recall: v[1],
            f1: v[2],
            claim_recall: v[3],
            context_precision: v[4],
            faithfulness: v[5],
            hallucination: v[6],
        }
    }
}

/// Harmonic mean, 0 when both inputs are 0.
pub fn f1(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

fn ratio(hits: usize, total: usize, name: &str, degenerate: &mut Vec<String>) -> f64 {
    if total == 0 {
        degenerate.push(String::from(name));
        0.0
    } else {
        hits as f64 / total as f64
    }
}

/// Computes the metrics; names of metrics with a zero denominator are
/// returned alongside (those metrics are 0).
pub fn compute(v: &ClaimVerdicts) -> (Metrics, Vec<String>) {
    let mut degenerate = Vec::new();
    let na = v.answer_claims.len();
    let ng = v.gt_claims.len();
    let count_a = |pred: fn(&AnswerClaimVerdict) -> bool| v.answer_claims.iter().filter(|c| pred(c)).count();
    let count_g = |pred: fn(&GtClaimVerdict) -> bool| v.gt_claims.iter().filter(|c| pred(c)).count();

    let precision = ratio(count_a(|c| c.entailed_by_gt), na, "precision", &mut degenerate);
    let recall = ratio(count_g(|c| c.entailed_by_answer), ng, "recall", &mut degenerate);
    let claim_recall = ratio(count_g(|c| c.entailed_by_context), ng, "claim_recall", &mut degenerate);
    let context_precision = ratio(
        v.chunk_relevant.iter().filter(|&&r| r).count(),
        v.chunk_relevant.len(),
        "context_precision",
        &mut degenerate,
    );
    let faithfulness = ratio(count_a(|c| c.entailed_by_context), na, "faithfulness", &mut degenerate);
    let hallucination = ratio(
        count_a(|c| !c.entailed_by_context && !c.entailed_by_gt),
        na,
        "hallucination",
        &mut degenerate,
    );
    (
        Metrics {
            precision,
            recall,
            f1: f1(precision, recall),
            claim_recall,
            context_precision,
            faithfulness,
            hallucination,
        },
        degenerate,
    )
}

/// Arithmetic mean of each metric across records (per-question averaging).
/// F1 is averaged as-is, not recomputed from the mean precision and recall.
pub fn macro_average(records: &[Metrics]) -> Metrics {
    if records.is_empty() {
        return Metrics::default();
    }
    let mut sums = [0.0; 7];
    for m in records {
        for (s, v) in sums.iter_mut().zip(m.values()) {
            *s += v;
        }
    }
    Metrics::from_values(sums.map(|s| s / records.len() as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn perfect_case() {
        let v = ClaimVerdicts {
            answer_claims: vec![
                AnswerClaimVerdict {
                    entailed_by_gt: true,
                    entailed_by_context: true
                };
                2
            ],
            gt_claims: vec![
                GtClaimVerdict {
                    entailed_by_answer: true,
                    entailed_by_context: true
                };
                2
            ],
            chunk_relevant: vec![true],
        };
        let (m, degenerate) = compute(&v);
        assert_eq!(m.values(), [1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 0.0]);
        assert!(degenerate.is_empty());
    }

    #[test]
    fn harmonic_mean_zero() {
        assert_eq!(f1(1.0, 0.0), 0.0);
        assert_eq!(f1(0.0, 0.0), 0.0);
    }

    #[test]
    fn empty_denominators_are_flagged() {
        let (m, degenerate) = compute(&ClaimVerdicts::default());
        assert_eq!(m, Metrics::default());
        assert_eq!(degenerate.len(), 6);
    }

    #[test]
    fn macro_average_of_f1() {
        let a = Metrics {
            f1: 1.0,
            ..Default::default()
        };
        let b = Metrics::default();
        assert_eq!(macro_average(&[a, b]).f1, 0.5);
    }
}
