use std::collections::HashSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::IngestError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Valid,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Valid => "valid",
            Split::Test => "test",
        })
    }
}

impl FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "train" => Ok(Split::Train),
            "valid" | "validation" => Ok(Split::Valid),
            "test" => Ok(Split::Test),
            other => Err(format!("unknown split {other:?}")),
        }
    }
}

/// One `<code, description>` example.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusPair {
    pub id: String,
    pub code: String,
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum SkipReason {
    InvalidUtf8,
    MissingField(&'static str),
    EmptyField(&'static str),
    DuplicateId(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SkippedRecord {
    pub line: usize,
    pub reason: SkipReason,
}

#[derive(Debug, Clone, Default)]
pub struct Corpus {
    pub pairs: Vec<CorpusPair>,
    pub skipped: Vec<SkippedRecord>,
}

fn string_field<'a>(obj: &'a serde_json::Map<String, Value>, names: &[&str]) -> Option<&'a str> {
    names.iter().find_map(|n| obj.get(*n).and_then(Value::as_str))
}

/// Parse newline-delimited JSON records (`id`, `code`, `docstring`).
///
/// `description` is accepted in place of `docstring`; without an `id` the
/// record's `url`, then `<split>-<line>`, is used.
pub fn parse_corpus(bytes: &[u8], split: Split) -> Result<Corpus, IngestError> {
    let mut corpus = Corpus::default();
    let mut seen = HashSet::new();
    for (n, raw) in bytes.split(|&b| b == b'\n').enumerate() {
        let line = n + 1;
        let raw = raw.strip_suffix(b"\r").unwrap_or(raw);
        if raw.iter().all(u8::is_ascii_whitespace) {
            continue;
        }
        let Ok(text) = std::str::from_utf8(raw) else {
            log::warn!("{split} line {line}: invalid UTF-8, skipped");
            corpus.skipped.push(SkippedRecord { line, reason: SkipReason::InvalidUtf8 });
            continue;
        };
        let value: Value = serde_json::from_str(text)
            .map_err(|e| IngestError::MalformedRecord { line, reason: e.to_string() })?;
        let Value::Object(obj) = value else {
            return Err(IngestError::MalformedRecord { line, reason: "record is not an object".into() });
        };
        let skip = |reason| SkippedRecord { line, reason };
        let Some(code) = string_field(&obj, &["code"]) else {
            log::warn!("{split} line {line}: missing \"code\", skipped");
            corpus.skipped.push(skip(SkipReason::MissingField("code")));
            continue;
        };
        let Some(description) = string_field(&obj, &["docstring", "description"]) else {
            log::warn!("{split} line {line}: missing \"description\", skipped");
            corpus.skipped.push(skip(SkipReason::MissingField("description")));
            continue;
        };
        if code.trim().is_empty() {
            corpus.skipped.push(skip(SkipReason::EmptyField("code")));
            continue;
        }
        if description.trim().is_empty() {
            corpus.skipped.push(skip(SkipReason::EmptyField("description")));
            continue;
        }
        let id = match obj.get("id") {
            Some(Value::String(s)) => s.clone(),
            Some(Value::Number(num)) => num.to_string(),
            _ => string_field(&obj, &["url"]).map_or_else(|| format!("{split}-{line}"), str::to_string),
        };
        if !seen.insert(id.clone()) {
            log::warn!("{split} line {line}: duplicate id {id:?}, skipped");
            corpus.skipped.push(skip(SkipReason::DuplicateId(id)));
            continue;
        }
        corpus.pairs.push(CorpusPair { id, code: code.to_string(), description: description.to_string() });
    }
    Ok(corpus)
}

pub fn load_corpus(path: &Path, split: Split) -> Result<Corpus, IngestError> {
    let bytes = std::fs::read(path).map_err(|e| IngestError::io(path, e))?;
    let corpus = parse_corpus(&bytes, split)?;
    log::info!(
        "{}: {} {split} pairs, {} skipped",
        path.display(),
        corpus.pairs.len(),
        corpus.skipped.len()
    );
    Ok(corpus)
}
