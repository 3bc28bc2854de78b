//! Recursive separator-hierarchy splitter with token overlap, and the
//! contextual-chunk text builder.
//!
//! Sizes are counted in whitespace tokens (maximal runs of non-whitespace).
//! Chunks are contiguous byte spans of the source, so dropping the overlap
//! prefix of every chunk after the first reconstructs the document exactly.
//!
//! A span that exceeds the budget is cut at every occurrence of the current
//! separator; the resulting pieces are greedily re-packed up to the budget and
//! any piece that is still too large is split again one level down. Overlap is
//! added afterwards from the trailing tokens of the previous chunk, except
//! where the new chunk opens a Markdown heading (a section boundary).

use alloc::string::String;
use alloc::vec::Vec;
use core::ops::Range;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Chunk, ChunkMetadata, Document};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Separator {
    /// Start of a Markdown ATX heading line.
    Heading,
    /// End of a run of two or more line breaks.
    BlankLine,
    Newline,
    /// Whitespace after `.`, `!` or `?`.
    Sentence,
    Space,
    Character,
}

impl Separator {
    pub const DEFAULT_HIERARCHY: [Separator; 6] = [
        Separator::Heading,
        Separator::BlankLine,
        Separator::Newline,
        Separator::Sentence,
        Separator::Space,
        Separator::Character,
    ];
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChunkingParams {
    pub max_tokens: usize,
    pub overlap_tokens: usize,
    pub separators: Vec<Separator>,
}

impl Default for ChunkingParams {
    fn default() -> Self {
        Self {
            max_tokens: 1000,
            overlap_tokens: 100,
            separators: Separator::DEFAULT_HIERARCHY.to_vec(),
        }
    }
}

impl ChunkingParams {
    pub fn new(max_tokens: usize, overlap_tokens: usize) -> Self {
        Self {
            max_tokens,
            overlap_tokens,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_tokens == 0 {
            return Err(Error::InvalidParams("max_tokens must be positive".into()));
        }
        if self.overlap_tokens >= self.max_tokens {
            return Err(Error::InvalidParams("overlap_tokens must be < max_tokens".into()));
        }
        Ok(())
    }
}

/// Byte positions of every whitespace token, for O(log n) span counting.
struct TokenIndex {
    starts: Vec<usize>,
    ends: Vec<usize>,
}

impl TokenIndex {
    fn new(text: &str) -> Self {
        let mut starts = Vec::new();
        let mut ends = Vec::new();
        let mut in_token = false;
        for (i, ch) in text.char_indices() {
            match (ch.is_whitespace(), in_token) {
                (false, false) => {
                    starts.push(i);
                    in_token = true;
                }
                (true, true) => {
                    ends.push(i);
                    in_token = false;
                }
                _ => {}
            }
        }
        if in_token {
            ends.push(text.len());
        }
        Self { starts, ends }
    }

    /// Tokens intersecting `[s, e)`; a token cut by either edge counts once.
    fn count(&self, s: usize, e: usize) -> usize {
        if s >= e {
            return 0;
        }
        let began_before_end = self.starts.partition_point(|&p| p < e);
        let ended_before_start = self.ends.partition_point(|&p| p <= s);
        began_before_end.saturating_sub(ended_before_start)
    }

    /// Start of the `n`-th token counted back from `end`, not before `floor`.
    fn nth_start_back(&self, floor: usize, end: usize, n: usize) -> Option<usize> {
        let lo = self.starts.partition_point(|&p| p < floor);
        let hi = self.starts.partition_point(|&p| p < end);
        let available = hi - lo;
        if n == 0 || available == 0 {
            return None;
        }
        Some(self.starts[hi - n.min(available)])
    }
}

fn is_heading_line(rest: &str) -> bool {
    let trimmed = rest.trim_start_matches(' ');
    if rest.len() - trimmed.len() > 3 {
        return false;
    }
    let hashes = trimmed.bytes().take_while(|&b| b == b'#').count();
    (1..=6).contains(&hashes)
        && trimmed[hashes..]
            .chars()
            .next()
            .is_none_or(|c| c == ' ' || c == '\t' || c == '\n' || c == '\r')
}

/// True if `pos` starts a Markdown heading line.
fn opens_heading(text: &str, pos: usize) -> bool {
    (pos == 0 || text.as_bytes()[pos - 1] == b'\n') && is_heading_line(&text[pos..])
}

/// Cut positions strictly inside `span` for one separator level.
fn cut_points(text: &str, span: Range<usize>, sep: Separator) -> Vec<usize> {
    let slice = &text[span.clone()];
    let base = span.start;
    let mut cuts = Vec::new();
    match sep {
        Separator::Heading => {
            for (i, _) in slice.match_indices('\n') {
                let p = base + i + 1;
                if p < span.end && opens_heading(text, p) {
                    cuts.push(p);
                }
            }
        }
        Separator::BlankLine | Separator::Space | Separator::Sentence => {
            // Walk maximal whitespace runs; cut at the end of qualifying runs.
            let mut chars = slice.char_indices().peekable();
            let mut prev: Option<char> = None;
            while let Some((i, ch)) = chars.next() {
                if !ch.is_whitespace() {
                    prev = Some(ch);
                    continue;
                }
                let mut newlines = usize::from(ch == '\n');
                let mut run_end = i + ch.len_utf8();
                while let Some(&(j, c)) = chars.peek() {
                    if !c.is_whitespace() {
                        break;
                    }
                    newlines += usize::from(c == '\n');
                    run_end = j + c.len_utf8();
                    chars.next();
                }
                let qualifies = match sep {
                    Separator::BlankLine => newlines >= 2,
                    Separator::Sentence => matches!(prev, Some('.' | '!' | '?')),
                    _ => true,
                };
                let p = base + run_end;
                if qualifies && p < span.end && p > span.start {
                    cuts.push(p);
                }
                prev = Some(ch);
            }
        }
        Separator::Newline => {
            for (i, _) in slice.match_indices('\n') {
                let p = base + i + 1;
                if p < span.end {
                    cuts.push(p);
                }
            }
        }
        Separator::Character => {
            cuts.extend(slice.char_indices().skip(1).map(|(i, _)| base + i));
        }
    }
    cuts
}

struct Splitter<'a> {
    text: &'a str,
    tokens: TokenIndex,
    limit: usize,
    separators: &'a [Separator],
}

impl Splitter<'_> {
    fn split(&self, span: Range<usize>, level: usize, out: &mut Vec<Range<usize>>) {
        if self.tokens.count(span.start, span.end) <= self.limit {
            out.push(span);
            return;
        }
        let Some(&sep) = self.separators.get(level) else {
            // Hierarchy exhausted without a character level: hard cut by chars.
            return self.split_with(span, Separator::Character, self.separators.len(), out);
        };
        self.split_with(span, sep, level + 1, out);
    }

    fn split_with(&self, span: Range<usize>, sep: Separator, next_level: usize, out: &mut Vec<Range<usize>>) {
        let cuts = cut_points(self.text, span.clone(), sep);
        if cuts.is_empty() {
            if sep == Separator::Character {
                // single character: cannot be split further
                out.push(span);
            } else {
                self.split(span, next_level, out);
            }
            return;
        }
        let mut bounds = Vec::with_capacity(cuts.len() + 2);
        bounds.push(span.start);
        bounds.extend(cuts);
        bounds.push(span.end);

        let mut group: Option<Range<usize>> = None;
        for w in bounds.windows(2) {
            let piece = w[0]..w[1];
            if self.tokens.count(piece.start, piece.end) > self.limit {
                if let Some(g) = group.take() {
                    out.push(g);
                }
                self.split(piece, next_level, out);
                continue;
            }
            group = match group {
                None => Some(piece),
                Some(g) if self.tokens.count(g.start, piece.end) <= self.limit => Some(g.start..piece.end),
                Some(g) => {
                    out.push(g);
                    Some(piece)
                }
            };
        }
        if let Some(g) = group {
            out.push(g);
        }
    }
}

/// Splits `text` into chunk spans. Spans after the first may begin inside the
/// previous span (the overlap); `spans[i].start..spans[i-1].end` is the shared
/// region.
pub fn split_spans(text: &str, params: &ChunkingParams) -> Result<Vec<Range<usize>>> {
    params.validate()?;
    if text.is_empty() {
        return Ok(Vec::new());
    }
    let splitter = Splitter {
        text,
        tokens: TokenIndex::new(text),
        limit: params.max_tokens - params.overlap_tokens,
        separators: &params.separators,
    };
    let mut parts = Vec::new();
    splitter.split(0..text.len(), 0, &mut parts);

    // Fold whitespace-only parts into their successor (or predecessor at the end).
    let mut merged: Vec<Range<usize>> = Vec::with_capacity(parts.len());
    let mut carry: Option<usize> = None;
    for part in parts {
        if splitter.tokens.count(part.start, part.end) == 0 {
            carry.get_or_insert(part.start);
            continue;
        }
        let start = carry.take().unwrap_or(part.start);
        merged.push(start..part.end);
    }
    if let Some(start) = carry {
        match merged.last_mut() {
            Some(last) => last.end = text.len(),
            None => merged.push(start..text.len()),
        }
    }

    if params.overlap_tokens == 0 {
        return Ok(merged);
    }
    let mut spans: Vec<Range<usize>> = Vec::with_capacity(merged.len());
    for part in merged {
        let start = match spans.last() {
            Some(prev) if !opens_heading(text, part.start) => splitter
                .tokens
                .nth_start_back(prev.start + 1, part.start, params.overlap_tokens)
                .unwrap_or(part.start),
            _ => part.start,
        };
        spans.push(start..part.end);
    }
    Ok(spans)
}

/// Splits a document into chunks with empty metadata and
/// `contextual_text == text`.
pub fn split(doc: &Document, params: &ChunkingParams) -> Result<Vec<Chunk>> {
    if doc.markdown_text.is_empty() {
        return Err(Error::InvalidParams(alloc::format!("document {} is empty", doc.doc_id)));
    }
    let spans = split_spans(&doc.markdown_text, params)?;
    Ok(spans
        .into_iter()
        .enumerate()
        .map(|(ordinal, span)| {
            let text = String::from(&doc.markdown_text[span.clone()]);
            Chunk {
                chunk_id: Chunk::make_id(&doc.doc_id, ordinal),
                doc_id: doc.doc_id.clone(),
                ordinal,
                start: span.start,
                end: span.end,
                contextual_text: text.clone(),
                text,
                metadata: ChunkMetadata::default(),
            }
        })
        .collect())
}

/// Number of whitespace tokens in `text`.
pub fn token_count(text: &str) -> usize {
    crate::text::count_words(text)
}

/// Metadata header followed by a blank line and the raw chunk text:
///
/// ```text
/// Clusters: a; b
/// Entities: 3M; Bertha
/// Questions: ...
/// Insights: ...
///
/// <text>
/// ```
pub fn build_contextual_text(metadata: &ChunkMetadata, text: &str) -> String {
    let mut out = String::with_capacity(text.len() + 256);
    let lines: [(&str, &[String]); 4] = [
        ("Clusters:", &metadata.parent_clusters),
        ("Entities:", &metadata.chunk_entities),
        ("Questions:", &metadata.answered_questions),
        ("Insights:", &metadata.retrieval_nuggets),
    ];
    for (label, items) in lines {
        out.push_str(label);
        if !items.is_empty() {
            out.push(' ');
            out.push_str(&items.join("; "));
        }
        out.push('\n');
    }
    out.push('\n');
    out.push_str(text);
    out
}

impl Chunk {
    /// Attaches metadata and rebuilds `contextual_text`.
    pub fn with_metadata(mut self, metadata: ChunkMetadata) -> Self {
        self.contextual_text = build_contextual_text(&metadata, &self.text);
        self.metadata = metadata;
        self
    }
}
