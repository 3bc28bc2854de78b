//! Text normalization shared by the indexes, the filter and the rerankers.

use alloc::string::String;
use alloc::vec::Vec;
use unicode_normalization::UnicodeNormalization;

/// Identifier of the lexical analyzer, persisted in index manifests.
pub const ANALYZER_ID: &str = "lowercase-alnum-v1";

/// Normalizes a metadata label (entity or cluster) for comparison:
/// NFKC, lowercase, whitespace runs collapsed to one space, trimmed.
pub fn normalize_label(label: &str) -> String {
    let mut out = String::with_capacity(label.len());
    let mut pending_space = false;
    for ch in label.nfkc().flat_map(char::to_lowercase) {
        if ch.is_whitespace() {
            pending_space = !out.is_empty();
            continue;
        }
        if pending_space {
            out.push(' ');
            pending_space = false;
        }
        out.push(ch);
    }
    out
}

/// Lexical analyzer: lowercase, split on any non-alphanumeric character,
/// drop empty tokens. No stemming, no stopwords.
pub fn analyze(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    for ch in text.chars().flat_map(char::to_lowercase) {
        if ch.is_alphanumeric() {
            current.push(ch);
        } else if !current.is_empty() {
            tokens.push(core::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        tokens.push(current);
    }
    tokens
}

/// Analyzer tokens of the NFKC-normalized label.
pub fn label_tokens(label: &str) -> Vec<String> {
    analyze(&normalize_label(label))
}

/// True when `needle` occurs as a contiguous run inside `haystack`.
/// An empty needle never matches.
pub fn contains_phrase(haystack: &[String], needle: &[String]) -> bool {
    !needle.is_empty() && needle.len() <= haystack.len() && haystack.windows(needle.len()).any(|w| w == needle)
}

/// Number of whitespace-delimited tokens in `text`.
pub fn count_words(text: &str) -> usize {
    text.split_whitespace().count()
}
