//! Recovery parsers for model output.
//!
//! Small models wrap their answers in prose, repeat the template's doubled
//! braces, or trail off after the JSON. The parsers search for the first
//! integer array / last top-level object instead of requiring strict output.

use serde::Serialize;
use serde_json::{Map, Value};

use crate::error::{AxeError, Result};

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct PruneDecision {
    /// Sorted, unique, in range.
    pub kept_indices: Vec<usize>,
}

impl PruneDecision {
    pub fn all(offered: usize) -> PruneDecision {
        PruneDecision {
            kept_indices: (0..offered).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExtractorOutput {
    pub reasoning: String,
    pub payload: Value,
}

/// Parses one JSON value starting exactly at `s[0]`; returns it and the
/// number of bytes consumed.
fn value_at(s: &str) -> Option<(Value, usize)> {
    let mut stream = serde_json::Deserializer::from_str(s).into_iter::<Value>();
    match stream.next() {
        Some(Ok(v)) => Some((v, stream.byte_offset())),
        _ => None,
    }
}

fn as_index_list(v: &Value) -> Option<Vec<i64>> {
    v.as_array()?.iter().map(Value::as_i64).collect()
}

/// First syntactically valid JSON array of integers in `raw`; indices
/// outside `0..offered` are dropped, the rest sorted and deduplicated.
pub fn parse_prune(raw: &str, offered: usize) -> Result<PruneDecision> {
    for (at, _) in raw.match_indices('[') {
        let Some((value, _)) = value_at(&raw[at..]) else {
            continue;
        };
        let Some(list) = as_index_list(&value) else {
            continue;
        };
        let mut kept: Vec<usize> = list
            .into_iter()
            .filter_map(|i| usize::try_from(i).ok())
            .filter(|&i| i < offered)
            .collect();
        kept.sort_unstable();
        kept.dedup();
        return Ok(PruneDecision { kept_indices: kept });
    }
    Err(AxeError::Unparseable("index list"))
}

/// Top-level JSON objects in `raw`, left to right, with their byte spans.
fn objects(raw: &str) -> Vec<(usize, usize, Map<String, Value>)> {
    let mut found = Vec::new();
    let mut from = 0;
    while let Some(rel) = raw[from..].find('{') {
        let at = from + rel;
        match value_at(&raw[at..]) {
            Some((Value::Object(map), used)) => {
                found.push((at, at + used, map));
                from = at + used;
            }
            _ => from = at + 1,
        }
    }
    found
}

/// Splits an optional leading `REASONING:` segment and takes the last
/// top-level JSON object as payload. With `schema_keys`, the payload is
/// projected onto exactly those keys (absent ones become null).
pub fn parse_extraction(raw: &str, schema_keys: Option<&[String]>) -> Result<ExtractorOutput> {
    let (start, _, map) = objects(raw)
        .pop()
        .ok_or(AxeError::Unparseable("JSON object"))?;

    let head = raw[..start].trim_end_matches('{').trim();
    let reasoning = head
        .strip_prefix("REASONING:")
        .map(|r| {
            let r = r.trim();
            r.strip_prefix('"')
                .and_then(|r| r.strip_suffix('"'))
                .unwrap_or(r)
                .trim()
                .to_string()
        })
        .unwrap_or_default();

    let payload = match schema_keys {
        None => Value::Object(map),
        Some(keys) => {
            let mut map = map;
            Value::Object(
                keys.iter()
                    .map(|k| (k.clone(), map.remove(k).unwrap_or(Value::Null)))
                    .collect(),
            )
        }
    };
    Ok(ExtractorOutput { reasoning, payload })
}

/// Renders a payload value as the string stored in a filled schema.
pub fn value_to_text(v: &Value) -> Option<String> {
    match v {
        Value::Null => None,
        Value::String(s) => Some(s.clone()),
        other => Some(other.to_string()),
    }
}
