//! Versioned prompt assets with `{name}` placeholders.
//!
//! Each asset holds a system part and a user part separated by a line
//! containing only `---`.

use std::collections::BTreeMap;

use crate::gateway::{GatewayError, Schema};

pub const PROMPT_VERSION: &str = "prompts-v1";

pub mod task {
    pub const DOC_METADATA: &str = "doc_metadata";
    pub const CHUNK_METADATA: &str = "chunk_metadata";
    pub const FILE_FILTER: &str = "file_filter";
    pub const QUERY_REWRITE: &str = "query_rewrite";
    pub const ANSWER: &str = "answer";
    pub const CLAIM_EXTRACTION: &str = "claim_extraction";
    pub const ENTAILMENT: &str = "entailment";
}

fn asset(name: &str) -> Option<&'static str> {
    Some(match name {
        task::DOC_METADATA => include_str!("../prompts/doc_metadata.txt"),
        task::CHUNK_METADATA => include_str!("../prompts/chunk_metadata.txt"),
        task::FILE_FILTER => include_str!("../prompts/file_filter.txt"),
        task::QUERY_REWRITE => include_str!("../prompts/query_rewrite.txt"),
        task::ANSWER => include_str!("../prompts/answer.txt"),
        task::CLAIM_EXTRACTION => include_str!("../prompts/claim_extraction.txt"),
        task::ENTAILMENT => include_str!("../prompts/entailment.txt"),
        _ => return None,
    })
}

/// A rendered prompt plus the values it was rendered from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Prompt {
    pub task: &'static str,
    pub system: String,
    pub user: String,
    pub vars: BTreeMap<String, String>,
}

/// Replaces `{ident}` occurrences whose identifier is lowercase ASCII or
/// underscore. Other braces are copied verbatim.
fn substitute(template: &str, vars: &BTreeMap<String, String>) -> Result<String, String> {
    let mut out = String::with_capacity(template.len());
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let after = &rest[open + 1..];
        let ident_len = after
            .bytes()
            .take_while(|b| b.is_ascii_lowercase() || *b == b'_')
            .count();
        if ident_len > 0 && after.as_bytes().get(ident_len) == Some(&b'}') {
            let name = &after[..ident_len];
            let value = vars
                .get(name)
                .ok_or_else(|| format!("no value for placeholder `{name}`"))?;
            out.push_str(value);
            rest = &after[ident_len + 1..];
        } else {
            out.push('{');
            rest = after;
        }
    }
    out.push_str(rest);
    Ok(out)
}

impl Prompt {
    /// Renders the asset for `task`. `schema`, when given, fills the
    /// `{schema}` placeholder.
    pub fn render(task: &'static str, vars: &[(&str, &str)], schema: Option<&Schema>) -> Result<Self, GatewayError> {
        let template = asset(task).ok_or_else(|| GatewayError::Config(format!("unknown prompt `{task}`")))?;
        let (system, user) = template
            .split_once("\n---\n")
            .ok_or_else(|| GatewayError::Config(format!("prompt `{task}` lacks a separator")))?;
        let mut values: BTreeMap<String, String> = vars.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
        if let Some(s) = schema {
            values.insert("schema".into(), s.describe());
        }
        let fail = |e: String| GatewayError::Config(format!("prompt `{task}`: {e}"));
        Ok(Self {
            task,
            system: substitute(system.trim(), &values).map_err(fail)?,
            user: substitute(user.trim(), &values).map_err(fail)?,
            vars: values,
        })
    }

    /// Follow-up asking the model to fix a rejected structured reply.
    pub fn repair(&self, previous: &str, error: &str, schema: &Schema) -> Self {
        let user = format!(
            "{}\n\nYour previous reply was rejected.\nReply:\n{previous}\nError: {error}\n\
             Return only a corrected JSON object of the form {}.",
            self.user,
            schema.describe()
        );
        Self { user, ..self.clone() }
    }
}
