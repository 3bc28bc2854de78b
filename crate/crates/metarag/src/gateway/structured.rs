use std::collections::BTreeMap;

use serde_json::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldKind {
    /// Non-empty string.
    Text,
    /// List of strings, any length.
    TextList,
    /// List of strings with inclusive length bounds.
    BoundedList {
        min: usize,
        max: usize,
    },
    Bool,
}

impl FieldKind {
    fn describe(self) -> String {
        match self {
            FieldKind::Text => "non-empty string".into(),
            FieldKind::TextList => "array of strings".into(),
            FieldKind::BoundedList { min, max } => format!("array of {min} to {max} strings"),
            FieldKind::Bool => "boolean".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SchemaError {
    #[error("no JSON object found in output")]
    NoObject,
    #[error("invalid JSON: {0}")]
    Json(String),
    #[error("missing required field `{0}`")]
    Missing(String),
    #[error("field `{field}` must be a {expected}")]
    Kind { field: String, expected: String },
    #[error("field `{field}` has {found} items, expected {min} to {max}")]
    Bounds {
        field: String,
        found: usize,
        min: usize,
        max: usize,
    },
}

/// Required fields of a JSON object, in declaration order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Schema {
    fields: Vec<(String, FieldKind)>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum FieldValue {
    Text(String),
    List(Vec<String>),
    Bool(bool),
}

/// A validated object: every schema field present with the declared kind.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StructuredRecord {
    values: BTreeMap<String, FieldValue>,
}

impl StructuredRecord {
    pub fn text(&self, field: &str) -> Option<&str> {
        match self.values.get(field)? {
            FieldValue::Text(s) => Some(s),
            _ => None,
        }
    }

    pub fn list(&self, field: &str) -> Option<&[String]> {
        match self.values.get(field)? {
            FieldValue::List(v) => Some(v),
            _ => None,
        }
    }

    pub fn flag(&self, field: &str) -> Option<bool> {
        match self.values.get(field)? {
            FieldValue::Bool(b) => Some(*b),
            _ => None,
        }
    }

    pub fn take_list(&mut self, field: &str) -> Vec<String> {
        match self.values.remove(field) {
            Some(FieldValue::List(v)) => v,
            _ => Vec::new(),
        }
    }

    pub fn take_text(&mut self, field: &str) -> String {
        match self.values.remove(field) {
            Some(FieldValue::Text(s)) => s,
            _ => String::new(),
        }
    }
}

/// Removes a surrounding Markdown code fence (with optional info string).
pub fn strip_fences(text: &str) -> &str {
    let t = text.trim();
    let Some(rest) = t.strip_prefix("```") else {
        return t;
    };
    let body = rest.split_once('\n').map_or("", |(_, b)| b);
    body.trim_end().strip_suffix("```").unwrap_or(body).trim()
}

impl Schema {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn field(mut self, name: &str, kind: FieldKind) -> Self {
        self.fields.push((name.to_string(), kind));
        self
    }

    pub fn is_empty(&self) -> bool {
        self.fields.is_empty()
    }

    pub fn fields(&self) -> &[(String, FieldKind)] {
        &self.fields
    }

    /// JSON-like description of the expected object, for prompts.
    pub fn describe(&self) -> String {
        let parts: Vec<String> = self
            .fields
            .iter()
            .map(|(n, k)| format!("\"{n}\": <{}>", k.describe()))
            .collect();
        format!("{{{}}}", parts.join(", "))
    }

    pub fn parse(&self, raw: &str) -> Result<StructuredRecord, SchemaError> {
        let body = strip_fences(raw);
        let (start, end) = match (body.find('{'), body.rfind('}')) {
            (Some(s), Some(e)) if s < e => (s, e),
            _ => return Err(SchemaError::NoObject),
        };
        let value: Value = serde_json::from_str(&body[start..=end]).map_err(|e| SchemaError::Json(e.to_string()))?;
        let Value::Object(map) = value else {
            return Err(SchemaError::NoObject);
        };
        let mut record = StructuredRecord::default();
        for (name, kind) in &self.fields {
            let v = map.get(name).ok_or_else(|| SchemaError::Missing(name.clone()))?;
            let kind_err = || SchemaError::Kind {
                field: name.clone(),
                expected: kind.describe(),
            };
            let parsed = match (kind, v) {
                (FieldKind::Text, Value::String(s)) if !s.trim().is_empty() => FieldValue::Text(s.trim().to_string()),
                (FieldKind::Text, _) => return Err(kind_err()),
                (FieldKind::Bool, Value::Bool(b)) => FieldValue::Bool(*b),
                (FieldKind::Bool, _) => return Err(kind_err()),
                (FieldKind::TextList | FieldKind::BoundedList { .. }, Value::Array(items)) => {
                    let list = items
                        .iter()
                        .map(|i| i.as_str().map(|s| s.trim().to_string()))
                        .collect::<Option<Vec<_>>>()
                        .ok_or_else(kind_err)?;
                    if let FieldKind::BoundedList { min, max } = *kind {
                        if list.len() < min || list.len() > max {
                            return Err(SchemaError::Bounds {
                                field: name.clone(),
                                found: list.len(),
                                min,
                                max,
                            });
                        }
                    }
                    FieldValue::List(list)
                }
                (FieldKind::TextList | FieldKind::BoundedList { .. }, _) => return Err(kind_err()),
            };
            record.values.insert(name.clone(), parsed);
        }
        Ok(record)
    }
}
