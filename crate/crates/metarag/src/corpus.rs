//! Reads a directory of Markdown files into documents.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use metarag_core::{Document, SourcePeriod};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Optional per-file attributes, keyed by doc id (file stem).
pub const SIDECAR: &str = "corpus_manifest.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkippedFile {
    pub file_name: String,
    pub reason: String,
}

#[derive(Debug, Clone, Default)]
pub struct Corpus {
    /// Sorted by doc id.
    pub documents: Vec<Document>,
    pub skipped: Vec<SkippedFile>,
}

fn is_markdown(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("md"))
}

/// Loads every `*.md` file directly inside `dir`. Unreadable, non-UTF-8,
/// blank and duplicate-stem files are skipped with a warning; a corpus with
/// nothing usable is an error.
pub fn load(dir: &Path) -> Result<Corpus> {
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut paths: Vec<_> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && is_markdown(p))
        .collect();
    paths.sort();

    let periods = load_sidecar(dir)?;
    let mut corpus = Corpus::default();
    let mut by_id: BTreeMap<String, Document> = BTreeMap::new();
    for path in paths {
        let file_name = path.file_name().unwrap_or_default().to_string_lossy().into_owned();
        let mut skip = |reason: String| {
            log::warn!("skipping {file_name}: {reason}");
            corpus.skipped.push(SkippedFile {
                file_name: file_name.clone(),
                reason,
            });
        };
        let Some(doc_id) = path.file_stem().and_then(|s| s.to_str()).map(str::to_string) else {
            skip("file name is not valid UTF-8".into());
            continue;
        };
        let text = match fs::read(&path) {
            Ok(bytes) => match String::from_utf8(bytes) {
                Ok(t) => t,
                Err(_) => {
                    skip("not valid UTF-8".into());
                    continue;
                }
            },
            Err(e) => {
                skip(format!("unreadable: {e}"));
                continue;
            }
        };
        if text.trim().is_empty() {
            skip("empty".into());
            continue;
        }
        if by_id.contains_key(&doc_id) {
            skip(format!("duplicate document id `{doc_id}`"));
            continue;
        }
        by_id.insert(
            doc_id.clone(),
            Document {
                source_period: periods.get(&doc_id).cloned(),
                doc_id,
                file_name: file_name.clone(),
                markdown_text: text,
            },
        );
    }
    if by_id.is_empty() {
        return Err(Error::EmptyCorpus(dir.to_path_buf()));
    }
    corpus.documents = by_id.into_values().collect();
    Ok(corpus)
}

fn load_sidecar(dir: &Path) -> Result<BTreeMap<String, SourcePeriod>> {
    let path = dir.join(SIDECAR);
    match fs::read_to_string(&path) {
        Ok(text) => serde_json::from_str(&text).map_err(|e| Error::format(&path, e)),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(BTreeMap::new()),
        Err(e) => Err(Error::io(&path, e)),
    }
}
