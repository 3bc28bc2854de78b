//! Offline provider with deterministic, content-derived behaviour.
//!
//! Every reply is a pure function of the request, except for the test hooks
//! (scripted replies, canned replies, injected failures). Simulated call
//! costs advance the [`VirtualClock`] so latency figures are reproducible.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use metarag_core::text::{analyze, normalize_label};
use serde_json::json;
use sha2::{Digest, Sha256};

use super::{ChatRequest, Clock, Provider, ProviderError, VirtualClock};
use crate::prompts::task;

pub const EMBED_DIM: usize = 64;

const FALLBACK_CLUSTERS: [&str; 8] = [
    "Company Overview",
    "Financial Performance",
    "Risk Factors",
    "Liquidity and Capital Resources",
    "Governance",
    "Outlook",
    "Segment Results",
    "Accounting Policies",
];

const DISCOURSE_MARKERS: [&str; 10] = [
    "however",
    "additionally",
    "moreover",
    "furthermore",
    "in addition",
    "also",
    "overall",
    "in summary",
    "therefore",
    "notably",
];

/// Words ignored when checking whether a claim is supported.
pub const STOPWORDS: [&str; 40] = [
    "a", "an", "and", "are", "as", "at", "be", "been", "by", "did", "do", "does", "for", "from", "had", "has", "have",
    "in", "is", "it", "its", "of", "on", "or", "that", "the", "their", "this", "to", "was", "were", "what", "which",
    "while", "who", "will", "with", "how", "than", "s",
];

const ENTITY_STOP: [&str; 16] = [
    "The", "A", "An", "In", "Our", "We", "This", "These", "For", "As", "On", "It", "Its", "Of", "And", "During",
];

#[derive(Default)]
struct Hooks {
    scripted: BTreeMap<String, VecDeque<String>>,
    canned: Vec<(String, String, String)>,
    failing: BTreeSet<String>,
    calls: BTreeMap<String, usize>,
}

/// Deterministic provider for tests, demos and reproducible benchmarks.
#[derive(Default)]
pub struct MockProvider {
    hooks: Mutex<Hooks>,
}

impl MockProvider {
    pub fn new() -> Self {
        Self::default()
    }

    /// Replies to successive calls for `task` with `replies`, in order, before
    /// falling back to the built-in behaviour.
    pub fn script(self, task: &str, replies: &[&str]) -> Self {
        self.hooks
            .lock()
            .unwrap()
            .scripted
            .entry(task.into())
            .or_default()
            .extend(replies.iter().map(|r| r.to_string()));
        self
    }

    /// Replies with `reply` whenever a `task` request mentions `needle`.
    pub fn canned(self, task: &str, needle: &str, reply: &str) -> Self {
        self.hooks
            .lock()
            .unwrap()
            .canned
            .push((task.into(), needle.into(), reply.into()));
        self
    }

    /// Makes every call for `op` fail with a transport error. `op` is a chat
    /// task name, `"embed"` or `"rerank"`.
    pub fn failing(self, op: &str) -> Self {
        self.hooks.lock().unwrap().failing.insert(op.into());
        self
    }

    /// Number of calls received for `op`, including failed ones.
    pub fn calls(&self, op: &str) -> usize {
        self.hooks.lock().unwrap().calls.get(op).copied().unwrap_or(0)
    }

    fn enter(&self, op: &str, cost: Duration) -> Result<(), ProviderError> {
        VirtualClock::advance(cost);
        let mut hooks = self.hooks.lock().unwrap();
        *hooks.calls.entry(op.into()).or_default() += 1;
        if hooks.failing.contains(op) {
            return Err(ProviderError::Transport(format!("simulated failure for {op}")));
        }
        Ok(())
    }

    fn hooked_reply(&self, req: &ChatRequest<'_>) -> Option<String> {
        let mut hooks = self.hooks.lock().unwrap();
        if let Some(reply) = hooks.scripted.get_mut(req.task).and_then(VecDeque::pop_front) {
            return Some(reply);
        }
        hooks
            .canned
            .iter()
            .find(|(t, needle, _)| {
                t == req.task
                    && (req.user.contains(needle.as_str()) || req.vars.values().any(|v| v.contains(needle.as_str())))
            })
            .map(|(_, _, reply)| reply.clone())
    }
}

fn cost(base_ms: u64, bytes: usize, ns_per_byte: u64) -> Duration {
    Duration::from_millis(base_ms) + Duration::from_nanos(bytes as u64 * ns_per_byte)
}

impl Provider for MockProvider {
    fn chat(&self, req: &ChatRequest<'_>) -> Result<String, ProviderError> {
        self.enter(req.task, cost(250, req.system.len() + req.user.len(), 2_000))?;
        if let Some(reply) = self.hooked_reply(req) {
            return Ok(reply);
        }
        let var = |name: &str| req.vars.get(name).map(String::as_str).unwrap_or("");
        Ok(match req.task {
            task::DOC_METADATA => doc_metadata(var("file_name"), var("text")),
            task::CHUNK_METADATA => chunk_metadata(var("chunk_text"), var("clusters")),
            task::FILE_FILTER => file_filter(var("query"), var("catalog")),
            task::QUERY_REWRITE => query_rewrite(var("query"), var("clusters")),
            task::ANSWER => extractive_answer(var("query"), var("context")),
            task::CLAIM_EXTRACTION => json!({ "claims": extract_claims(var("text")) }).to_string(),
            task::ENTAILMENT => json!({ "entailed": entails(var("premise"), var("claim")) }).to_string(),
            other => {
                return Err(ProviderError::Malformed(format!(
                    "mock has no behaviour for task `{other}`"
                )))
            }
        })
    }

    fn embed(&self, _model: &str, texts: &[String]) -> Result<Vec<Vec<f32>>, ProviderError> {
        let bytes = texts.iter().map(String::len).sum();
        self.enter("embed", cost(20, bytes, 500))?;
        Ok(texts.iter().map(|t| embed_text(t)).collect())
    }

    fn rerank(
        &self,
        _model: &str,
        query: &str,
        documents: &[String],
        top_n: usize,
    ) -> Result<Vec<(usize, f64)>, ProviderError> {
        let bytes = query.len() + documents.iter().map(String::len).sum::<usize>();
        self.enter("rerank", cost(50, bytes, 500))?;
        let q: BTreeSet<String> = analyze(query).into_iter().collect();
        let mut scored: Vec<(usize, f64)> = documents
            .iter()
            .enumerate()
            .map(|(i, d)| {
                if q.is_empty() {
                    return (i, 0.0);
                }
                let toks: BTreeSet<String> = analyze(d).into_iter().collect();
                (i, q.intersection(&toks).count() as f64 / q.len() as f64)
            })
            .collect();
        scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        scored.truncate(top_n);
        Ok(scored)
    }

    fn clock(&self) -> Arc<dyn Clock> {
        Arc::new(VirtualClock)
    }
}

fn digest(parts: &[&[u8]]) -> [u8; 32] {
    let mut h = Sha256::new();
    for p in parts {
        h.update(p);
    }
    h.finalize().into()
}

fn unit(v: &mut [f64]) {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
}

/// Unit vector mixing a content-hash direction with a hashed bag of words,
/// so texts sharing vocabulary are closer than unrelated ones.
pub fn embed_text(text: &str) -> Vec<f32> {
    let mut noise = [0.0f64; EMBED_DIM];
    for block in 0..EMBED_DIM / 32 {
        let d = digest(&[b"mock-embed-v1", &[block as u8], text.as_bytes()]);
        for (j, b) in d.iter().enumerate() {
            noise[block * 32 + j] = (*b as f64 - 127.5) / 127.5;
        }
    }
    unit(&mut noise);
    let mut bag = [0.0f64; EMBED_DIM];
    for tok in analyze(text) {
        let d = digest(&[b"mock-token-v1", tok.as_bytes()]);
        bag[u16::from_le_bytes([d[0], d[1]]) as usize % EMBED_DIM] += 1.0;
    }
    unit(&mut bag);
    let mut v: Vec<f64> = noise.iter().zip(&bag).map(|(n, b)| 0.3 * n + b).collect();
    unit(&mut v);
    v.into_iter().map(|x| x as f32).collect()
}

/// Sentence split on terminal punctuation followed by whitespace, and on
/// line breaks.
pub fn sentences(text: &str) -> Vec<&str> {
    let mut out = Vec::new();
    for line in text.lines() {
        let mut start = 0;
        let bytes = line.as_bytes();
        for i in 0..bytes.len() {
            let terminal = matches!(bytes[i], b'.' | b'!' | b'?');
            let boundary = i + 1 == bytes.len() || bytes[i + 1].is_ascii_whitespace();
            if terminal && boundary {
                out.push(line[start..=i].trim());
                start = i + 1;
            }
        }
        out.push(line[start..].trim());
    }
    out.retain(|s| !s.is_empty());
    out
}

fn is_heading(line: &str) -> bool {
    line.trim_start().starts_with('#')
}

fn prose(text: &str) -> String {
    text.lines()
        .filter(|l| !is_heading(l) && !l.trim_start().starts_with('|'))
        .collect::<Vec<_>>()
        .join("\n")
}

fn doc_metadata(file_name: &str, text: &str) -> String {
    let mut clusters: Vec<String> = Vec::new();
    let mut seen = BTreeSet::new();
    for line in text.lines().filter(|l| is_heading(l)) {
        let label = line.trim().trim_start_matches('#').trim().to_string();
        if !label.is_empty() && seen.insert(normalize_label(&label)) {
            clusters.push(label);
        }
    }
    for extra in FALLBACK_CLUSTERS {
        if clusters.len() >= 5 {
            break;
        }
        if seen.insert(normalize_label(extra)) {
            clusters.push(extra.to_string());
        }
    }
    clusters.truncate(20);
    let body = prose(text);
    let sents = sentences(&body);
    let lead = sents.first().copied().unwrap_or("no narrative text");
    let one_liner: String = format!("{file_name}: {lead}").chars().take(240).collect();
    let summary = if sents.is_empty() {
        format!("{file_name} contains no narrative text.")
    } else {
        sents.iter().take(3).copied().collect::<Vec<_>>().join(" ")
    };
    json!({ "one_liner": one_liner, "summary": summary, "clusters": clusters }).to_string()
}

fn token_set(text: &str) -> BTreeSet<String> {
    analyze(text).into_iter().collect()
}

fn entities(text: &str) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    let mut seen = BTreeSet::new();
    let mut run: Vec<&str> = Vec::new();
    let mut flush = |run: &mut Vec<&str>, out: &mut Vec<String>| {
        if !run.is_empty() {
            let e = run.join(" ");
            if seen.insert(normalize_label(&e)) {
                out.push(e);
            }
            run.clear();
        }
    };
    for raw in text.split_whitespace() {
        let word = raw.trim_matches(|c: char| !c.is_alphanumeric());
        let capital = word.chars().next().is_some_and(char::is_uppercase);
        let numeric = word.chars().any(|c| c.is_ascii_digit()) && word.chars().any(char::is_alphabetic);
        let year = word.len() == 4 && word.chars().all(|c| c.is_ascii_digit());
        if word.chars().count() >= 2 && (capital || numeric || year) && !ENTITY_STOP.contains(&word) {
            run.push(word);
        } else {
            flush(&mut run, &mut out);
        }
        // a phrase ends at punctuation
        if word.len() != raw.len() && !raw.ends_with(word) {
            flush(&mut run, &mut out);
        }
    }
    flush(&mut run, &mut out);
    out.truncate(8);
    out
}

fn chunk_metadata(chunk_text: &str, clusters: &str) -> String {
    let labels: Vec<&str> = clusters.lines().map(str::trim).filter(|l| !l.is_empty()).collect();
    let toks = token_set(chunk_text);
    let mut ranked: Vec<(usize, usize)> = labels
        .iter()
        .enumerate()
        .map(|(i, l)| (i, token_set(l).intersection(&toks).count()))
        .filter(|&(_, n)| n > 0)
        .collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    let mut parents: Vec<&str> = ranked.iter().take(2).map(|&(i, _)| labels[i]).collect();
    if parents.is_empty() {
        parents.extend(labels.first());
    }
    let body = prose(chunk_text);
    let sents = sentences(&body);
    let mut questions: Vec<String> = sents
        .iter()
        .take(10)
        .map(|s| {
            let head: Vec<&str> = s.split_whitespace().take(8).collect();
            format!(
                "What does the passage state about \"{}\"?",
                head.join(" ").trim_end_matches(['.', '!', '?'])
            )
        })
        .collect();
    let mut pad = parents.iter().chain(labels.iter()).cycle().take(6);
    while questions.len() < 3 {
        let topic = pad.next().copied().unwrap_or("this passage");
        let q = format!("What is disclosed about {topic} (item {})?", questions.len() + 1);
        questions.push(q);
    }
    let nuggets: Vec<&str> = sents
        .iter()
        .copied()
        .filter(|s| s.chars().any(|c| c.is_ascii_digit()))
        .take(5)
        .collect();
    json!({
        "parent_clusters": parents,
        "chunk_entities": entities(chunk_text),
        "answered_questions": questions,
        "retrieval_nuggets": nuggets,
    })
    .to_string()
}

fn file_filter(query: &str, catalog: &str) -> String {
    let q = token_set(query);
    let scored: Vec<(&str, usize)> = catalog
        .lines()
        .filter_map(|l| l.trim().strip_prefix("- "))
        .filter_map(|l| l.split_once(": "))
        .map(|(id, desc)| {
            let toks: BTreeSet<String> = token_set(id).union(&token_set(desc)).cloned().collect();
            (id, q.intersection(&toks).count())
        })
        .collect();
    let best = scored.iter().map(|s| s.1).max().unwrap_or(0);
    let ids: Vec<&str> = if best == 0 {
        Vec::new()
    } else {
        scored.iter().filter(|s| s.1 == best).map(|s| s.0).collect()
    };
    json!({ "doc_ids": ids }).to_string()
}

fn query_rewrite(query: &str, clusters: &str) -> String {
    let extra: Vec<&str> = clusters.split("; ").filter(|c| !c.is_empty()).take(3).collect();
    if extra.is_empty() {
        query.to_string()
    } else {
        format!("{query} {}", extra.join(" "))
    }
}

fn extractive_answer(query: &str, context: &str) -> String {
    let q: BTreeSet<String> = token_set(query)
        .into_iter()
        .filter(|t| !STOPWORDS.contains(&t.as_str()))
        .collect();
    let body: String = context
        .lines()
        .filter(|l| !(l.starts_with('[') && l.ends_with(']')))
        .collect::<Vec<_>>()
        .join("\n");
    let body = prose(&body);
    let sents = sentences(&body);
    let mut ranked: Vec<(usize, usize)> = sents
        .iter()
        .enumerate()
        .map(|(i, s)| (i, token_set(s).intersection(&q).count()))
        .filter(|&(_, n)| n > 0)
        .collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    let mut picked: Vec<usize> = ranked.iter().take(2).map(|&(i, _)| i).collect();
    if picked.is_empty() {
        return "The provided context does not contain the answer.".into();
    }
    picked.sort_unstable();
    picked.iter().map(|&i| sents[i]).collect::<Vec<_>>().join(" ")
}

fn strip_marker(sentence: &str) -> &str {
    let lower = sentence.to_lowercase();
    for m in DISCOURSE_MARKERS {
        if lower.starts_with(m) {
            let rest = &sentence[m.len()..];
            if let Some(r) = rest.strip_prefix(',') {
                return r.trim_start();
            }
        }
    }
    sentence
}

/// Sentence-level claims with discourse markers and final punctuation removed.
pub fn extract_claims(text: &str) -> Vec<String> {
    sentences(text)
        .into_iter()
        .map(|s| strip_marker(s).trim_end_matches(['.', '!', '?']).trim().to_string())
        .filter(|s| !s.is_empty())
        .collect()
}

/// True when every content word of `claim` occurs in `premise`.
pub fn entails(premise: &str, claim: &str) -> bool {
    let premise = token_set(premise);
    let all = analyze(claim);
    let content: Vec<&String> = all.iter().filter(|t| !STOPWORDS.contains(&t.as_str())).collect();
    let required: Vec<&String> = if content.is_empty() {
        all.iter().collect()
    } else {
        content
    };
    !required.is_empty() && required.iter().all(|t| premise.contains(*t))
}
