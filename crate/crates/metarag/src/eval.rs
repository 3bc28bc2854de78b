//! Claim-level evaluation of answer traces and benchmark reports.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use metarag_core::metrics::{self, AnswerClaimVerdict, ClaimVerdicts, GtClaimVerdict, Metrics};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::gateway::{FieldKind, Gateway, Role, Schema};
use crate::pipeline::{render_context, AnswerTrace, Pipeline, PipelineConfig, RerankerKind};
use crate::prompts::{task, Prompt};
use crate::store::{write_json, Index};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QaExample {
    pub id: String,
    pub question: String,
    pub ground_truth_answer: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub evidence_doc_ids: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub evidence_strings: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DatasetIssue {
    pub line: usize,
    pub message: String,
}

fn string_field(obj: &serde_json::Map<String, Value>, names: &[&str]) -> Option<String> {
    names
        .iter()
        .find_map(|n| obj.get(*n).and_then(Value::as_str))
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
}

fn string_list(v: Option<&Value>, inner: Option<&str>) -> Option<Vec<String>> {
    let items = v?.as_array()?;
    let out: Vec<String> = items
        .iter()
        .filter_map(|i| match inner {
            Some(key) => i.get(key).and_then(Value::as_str).or_else(|| i.as_str()),
            None => i.as_str(),
        })
        .map(str::to_string)
        .collect();
    Some(out)
}

/// One example from a JSON object using either the native field names or
/// the public FinanceBench names (`financebench_id`, `answer`, `doc_name`,
/// `evidence[].evidence_text`).
pub fn parse_example(line: &str, line_no: usize) -> std::result::Result<QaExample, String> {
    let value: Value = serde_json::from_str(line).map_err(|e| format!("invalid JSON: {e}"))?;
    let Value::Object(obj) = value else {
        return Err("not a JSON object".into());
    };
    let question = string_field(&obj, &["question"]).ok_or("missing or empty `question`")?;
    let ground_truth_answer =
        string_field(&obj, &["ground_truth_answer", "answer"]).ok_or("missing or empty `ground_truth_answer`")?;
    let id = string_field(&obj, &["id", "financebench_id"]).unwrap_or_else(|| format!("line-{line_no}"));
    let evidence_doc_ids =
        string_list(obj.get("evidence_doc_ids"), None).or_else(|| string_field(&obj, &["doc_name"]).map(|d| vec![d]));
    let evidence_strings = string_list(obj.get("evidence_strings"), None)
        .or_else(|| string_list(obj.get("evidence"), Some("evidence_text")));
    Ok(QaExample {
        id,
        question,
        ground_truth_answer,
        evidence_doc_ids,
        evidence_strings,
    })
}

/// Parses JSON Lines, collecting per-line problems instead of stopping.
pub fn parse_dataset(text: &str) -> (Vec<QaExample>, Vec<DatasetIssue>) {
    let mut examples = Vec::new();
    let mut issues = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match parse_example(line, i + 1) {
            Ok(e) => examples.push(e),
            Err(message) => {
                log::warn!("dataset line {}: {message}", i + 1);
                issues.push(DatasetIssue { line: i + 1, message });
            }
        }
    }
    (examples, issues)
}

pub fn load_dataset(path: &Path) -> Result<(Vec<QaExample>, Vec<DatasetIssue>)> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(parse_dataset(&text))
}

/// Claim extraction and entailment through the judge role.
pub struct Judge<'a> {
    gateway: &'a Gateway,
}

impl<'a> Judge<'a> {
    pub fn new(gateway: &'a Gateway) -> Self {
        Self { gateway }
    }

    /// Atomic claims of `text`; a judge failure yields the whole text as a
    /// single claim and `false` in the second slot.
    pub fn extract_claims(&self, text: &str) -> (Vec<String>, bool) {
        let text = text.trim();
        if text.is_empty() {
            return (Vec::new(), true);
        }
        let schema = Schema::new().field("claims", FieldKind::TextList);
        let result = Prompt::render(task::CLAIM_EXTRACTION, &[("text", text)], Some(&schema))
            .and_then(|p| self.gateway.chat_structured(Role::Judge, &p, &schema));
        match result {
            Ok(mut rec) => {
                let claims: Vec<String> = rec.take_list("claims").into_iter().filter(|c| !c.is_empty()).collect();
                if claims.is_empty() {
                    (vec![text.to_string()], true)
                } else {
                    (claims, true)
                }
            }
            Err(e) => {
                log::warn!("claim extraction failed: {e}");
                (vec![text.to_string()], false)
            }
        }
    }

    /// Whether `premise` supports `claim`; a judge failure counts as not
    /// entailed and `false` in the second slot.
    pub fn entails(&self, premise: &str, claim: &str) -> (bool, bool) {
        if premise.trim().is_empty() || claim.trim().is_empty() {
            return (false, true);
        }
        let schema = Schema::new().field("entailed", FieldKind::Bool);
        let result = Prompt::render(
            task::ENTAILMENT,
            &[("premise", premise), ("claim", claim)],
            Some(&schema),
        )
        .and_then(|p| self.gateway.chat_structured(Role::Judge, &p, &schema));
        match result {
            Ok(rec) => (rec.flag("entailed").unwrap_or(false), true),
            Err(e) => {
                log::warn!("entailment check failed: {e}");
                (false, false)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalRecord {
    pub question_id: String,
    pub question: String,
    pub answer_text: String,
    pub context_ids: Vec<String>,
    pub answer_claims: Vec<String>,
    pub gt_claims: Vec<String>,
    pub verdicts: ClaimVerdicts,
    pub metrics: Metrics,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub degenerate: Vec<String>,
    pub judge_failures: usize,
    pub latency_seconds: f64,
}

pub fn score_example(judge: &Judge<'_>, index: &Index, example: &QaExample, trace: &AnswerTrace) -> EvalRecord {
    let mut failures = 0;
    let mut note = |ok: bool| {
        if !ok {
            failures += 1;
        }
    };
    let (answer_claims, ok) = judge.extract_claims(&trace.answer_text);
    note(ok);
    let (gt_claims, ok) = judge.extract_claims(&example.ground_truth_answer);
    note(ok);
    let ids = trace.context_ids();
    let context = render_context(index, &ids);
    let mut check = |premise: &str, claim: &str| {
        let (v, ok) = judge.entails(premise, claim);
        note(ok);
        v
    };
    let answer_verdicts: Vec<AnswerClaimVerdict> = answer_claims
        .iter()
        .map(|a| AnswerClaimVerdict {
            entailed_by_gt: check(&example.ground_truth_answer, a),
            entailed_by_context: check(&context, a),
        })
        .collect();
    let gt_verdicts: Vec<GtClaimVerdict> = gt_claims
        .iter()
        .map(|g| GtClaimVerdict {
            entailed_by_answer: check(&trace.answer_text, g),
            entailed_by_context: check(&context, g),
        })
        .collect();
    let chunk_relevant: Vec<bool> = ids
        .iter()
        .map(|id| {
            let text = index.store.get(id).map_or("", |c| c.text.as_str());
            gt_claims.iter().any(|g| check(text, g))
        })
        .collect();
    let verdicts = ClaimVerdicts {
        answer_claims: answer_verdicts,
        gt_claims: gt_verdicts,
        chunk_relevant,
    };
    let (metrics, degenerate) = metrics::compute(&verdicts);
    EvalRecord {
        question_id: example.id.clone(),
        question: example.question.clone(),
        answer_text: trace.answer_text.clone(),
        context_ids: ids.iter().map(|s| s.to_string()).collect(),
        answer_claims,
        gt_claims,
        verdicts,
        metrics,
        degenerate,
        judge_failures: failures,
        latency_seconds: trace.total_latency_seconds,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FailedExample {
    pub question_id: String,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportRow {
    pub config: String,
    pub architecture: String,
    pub chunk_type: String,
    pub examples: usize,
    pub failed: usize,
    /// Arithmetic mean of per-example metrics.
    pub metrics: Metrics,
    pub mean_latency_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConfigResults {
    pub config: PipelineConfig,
    pub row: ReportRow,
    pub records: Vec<EvalRecord>,
    pub failures: Vec<FailedExample>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub results: Vec<ConfigResults>,
    pub dataset_issues: Vec<DatasetIssue>,
}

/// Descriptive architecture name for report tables.
pub fn architecture_name(cfg: &PipelineConfig) -> String {
    let reranker = match cfg.reranker {
        RerankerKind::External => " (External)",
        RerankerKind::Metadata => " (Metadata)",
        RerankerKind::None => "",
    };
    let reranked = |base: &str| {
        if cfg.reranker == RerankerKind::None {
            base.to_string()
        } else {
            format!("{base} + Reranking{reranker}")
        }
    };
    match cfg.architecture {
        1 => "Naive RAG".into(),
        2 => "Hybrid Retrieval".into(),
        3 | 5 => reranked("Hybrid Retrieval"),
        4 => reranked("Filtering + Rewriting + Hybrid Retrieval"),
        _ => format!(
            "{} + Chunk Expansion",
            reranked("Filtering + Rewriting + Hybrid Retrieval")
        ),
    }
}

fn chunk_type(cfg: &PipelineConfig) -> String {
    match cfg.collection {
        metarag_core::Collection::Standard => "Std".into(),
        metarag_core::Collection::Contextual => "Ctx".into(),
    }
}

/// Answers and scores every example under every configuration. Examples run
/// concurrently; records keep dataset order. Examples whose answer fails are
/// reported as failures and left out of the averages.
pub fn run_benchmark(
    gateway: &Gateway,
    index: &Index,
    dataset: &[QaExample],
    configs: &[PipelineConfig],
) -> Result<Report> {
    for c in configs {
        c.validate()?;
    }
    let pipeline = Pipeline::new(index, gateway);
    let judge = Judge::new(gateway);
    let mut results = Vec::with_capacity(configs.len());
    for cfg in configs {
        let outcomes: Vec<std::result::Result<EvalRecord, FailedExample>> = dataset
            .par_iter()
            .map(|ex| match pipeline.answer(&ex.question, cfg) {
                Ok(trace) => Ok(score_example(&judge, index, ex, &trace)),
                Err(e) => {
                    log::warn!("{} / {}: {e}", cfg.label(), ex.id);
                    Err(FailedExample {
                        question_id: ex.id.clone(),
                        error: e.to_string(),
                    })
                }
            })
            .collect();
        let (mut records, mut failures) = (Vec::new(), Vec::new());
        for o in outcomes {
            match o {
                Ok(r) => records.push(r),
                Err(f) => failures.push(f),
            }
        }
        let per: Vec<Metrics> = records.iter().map(|r| r.metrics).collect();
        let mean_latency = if records.is_empty() {
            0.0
        } else {
            records.iter().map(|r| r.latency_seconds).sum::<f64>() / records.len() as f64
        };
        results.push(ConfigResults {
            row: ReportRow {
                config: cfg.label(),
                architecture: architecture_name(cfg),
                chunk_type: chunk_type(cfg),
                examples: records.len(),
                failed: failures.len(),
                metrics: metrics::macro_average(&per),
                mean_latency_seconds: mean_latency,
            },
            config: cfg.clone(),
            records,
            failures,
        });
    }
    Ok(Report {
        results,
        dataset_issues: Vec::new(),
    })
}

const HEADERS: [&str; 10] = [
    "Architecture",
    "Chunk Type",
    "Prec",
    "Recall",
    "F1-score",
    "Claim Recall",
    "Context Precision",
    "Faith.",
    "Halluc.",
    "Mean Latency (s)",
];

fn row_cells(row: &ReportRow) -> Vec<String> {
    let mut cells = vec![row.architecture.clone(), row.chunk_type.clone()];
    cells.extend(row.metrics.values().iter().map(|v| format!("{:.1}", v * 100.0)));
    cells.push(format!("{:.2}", row.mean_latency_seconds));
    cells
}

impl Report {
    pub fn rows(&self) -> Vec<&ReportRow> {
        self.results.iter().map(|r| &r.row).collect()
    }

    /// Aligned plain-text table; metrics in percent.
    pub fn render_table(&self) -> String {
        let rows: Vec<Vec<String>> = self.rows().into_iter().map(row_cells).collect();
        let widths: Vec<usize> = (0..HEADERS.len())
            .map(|i| {
                rows.iter()
                    .map(|r| r[i].len())
                    .chain([HEADERS[i].len()])
                    .max()
                    .unwrap_or(0)
            })
            .collect();
        let mut out = String::new();
        let line = |cells: &[String], out: &mut String| {
            let parts: Vec<String> = cells
                .iter()
                .enumerate()
                .map(|(i, c)| {
                    if i < 2 {
                        format!("{c:<w$}", w = widths[i])
                    } else {
                        format!("{c:>w$}", w = widths[i])
                    }
                })
                .collect();
            let _ = writeln!(out, "{}", parts.join("  ").trim_end());
        };
        line(&HEADERS.map(String::from), &mut out);
        let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
        let _ = writeln!(out, "{}", rule.join("  "));
        for r in &rows {
            line(r, &mut out);
        }
        out
    }

    pub fn render_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["Config"];
        header.extend(HEADERS);
        header.extend(["Examples", "Failed"]);
        let err = |e: csv::Error| Error::Config(format!("csv: {e}"));
        w.write_record(&header).map_err(err)?;
        for row in self.rows() {
            let mut rec = vec![row.config.clone()];
            rec.extend(row_cells(row));
            rec.extend([row.examples.to_string(), row.failed.to_string()]);
            w.write_record(&rec).map_err(err)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Config(format!("csv: {e}")))?;
        String::from_utf8(bytes).map_err(|e| Error::Config(format!("csv: {e}")))
    }

    /// Writes `results.json`, `results.csv` and `results.txt` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_json(&dir.join("results.json"), self)?;
        let csv_path = dir.join("results.csv");
        fs::write(&csv_path, self.render_csv()?).map_err(|e| Error::io(&csv_path, e))?;
        let txt = dir.join("results.txt");
        fs::write(&txt, self.render_table()).map_err(|e| Error::io(&txt, e))
    }
}
