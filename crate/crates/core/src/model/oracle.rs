//! Deterministic offline clients.
//!
//! These are test fixtures with documented, simple behaviour; they make the
//! pipeline runnable end to end without model weights. They are not meant to
//! approximate the trained adaptors.

use std::collections::BTreeSet;

use serde_json::{json, Map, Value};

use super::{CompletionRequest, ModelClient, Task};
use crate::dom::{parse_html, DomTree};
use crate::error::ClientError;
use crate::gxr::{gestalt_ratio, normalize};

const STOPWORDS: &[&str] = &[
    "a", "about", "an", "and", "are", "as", "at", "be", "been", "by", "can", "could", "did", "do",
    "does", "for", "from", "give", "has", "have", "how", "in", "is", "it", "its", "list", "me",
    "of", "on", "or", "page", "please", "show", "tell", "that", "the", "these", "this", "those",
    "to", "was", "were", "what", "when", "where", "which", "who", "whom", "whose", "why", "will",
    "with", "would",
];

const BOOLEAN_LEADS: &[&str] = &[
    "is", "are", "was", "were", "does", "do", "did", "can", "could", "has", "have", "will",
    "should",
];

const NEGATIVE_VALUES: &[&str] = &["no", "false", "none", "unavailable", "out of stock", "0", "n/a"];

const LABEL_SIMILARITY: f64 = 0.85;

fn alnum_tokens(s: &str) -> Vec<String> {
    s.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// Value-bearing terms of a query: the key words of a JSON schema, or the
/// non-stopword words of a question.
pub fn query_terms(query: &str) -> BTreeSet<String> {
    if let Ok(Value::Object(map)) = serde_json::from_str::<Value>(query) {
        return map.keys().flat_map(|k| alnum_tokens(k)).collect();
    }
    alnum_tokens(query)
        .into_iter()
        .filter(|t| !STOPWORDS.contains(&t.as_str()))
        .collect()
}

/// Non-blank text nodes, trimmed, in document order.
pub fn text_blocks(tree: &DomTree) -> Vec<String> {
    tree.nodes()
        .filter_map(|n| n.text())
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect()
}

/// Keeps a mini-chunk iff its text shares a term with the query, or its
/// HTML contains one of the fixture markers.
#[derive(Debug, Clone)]
pub struct OraclePruner {
    pub markers: Vec<String>,
}

impl Default for OraclePruner {
    fn default() -> Self {
        OraclePruner {
            markers: vec!["data-axe-relevant".to_string()],
        }
    }
}

impl OraclePruner {
    pub fn decide(&self, items: &[String], query: &str) -> Vec<usize> {
        let terms = query_terms(query);
        items
            .iter()
            .enumerate()
            .filter(|(_, html)| {
                if self.markers.iter().any(|m| html.contains(m.as_str())) {
                    return true;
                }
                let text = parse_html(html)
                    .map(|t| t.visible_text(t.root_id()))
                    .unwrap_or_default();
                alnum_tokens(&text).iter().any(|t| terms.contains(t))
            })
            .map(|(i, _)| i)
            .collect()
    }
}

/// Label-following extractor: a value is the text after `Label:` in the same
/// block, or the next text block after a block that is the label.
#[derive(Debug, Clone, Default)]
pub struct OracleExtractor;

fn split_label(block: &str) -> (&str, &str) {
    match block.split_once(':') {
        Some((label, rest)) => (label, rest.trim()),
        None => (block, ""),
    }
}

fn clean_label(label: &str) -> String {
    normalize(label)
        .trim_end_matches(|c: char| !c.is_alphanumeric())
        .to_string()
}

fn value_after(blocks: &[String], i: usize) -> Option<String> {
    let (_, rest) = split_label(&blocks[i]);
    if !rest.is_empty() {
        return Some(rest.to_string());
    }
    blocks.get(i + 1).cloned()
}

impl OracleExtractor {
    pub fn fill(&self, tree: &DomTree, keys: &[String]) -> Map<String, Value> {
        let blocks = text_blocks(tree);
        keys.iter()
            .map(|key| {
                let want = normalize(key);
                let value = blocks
                    .iter()
                    .position(|b| {
                        let label = clean_label(split_label(b).0);
                        !label.is_empty()
                            && (label == want || gestalt_ratio(&label, &want) >= LABEL_SIMILARITY)
                    })
                    .and_then(|i| value_after(&blocks, i));
                (key.clone(), value.map(Value::String).unwrap_or(Value::Null))
            })
            .collect()
    }

    pub fn answer(&self, tree: &DomTree, question: &str) -> Option<String> {
        let terms = query_terms(question);
        let blocks = text_blocks(tree);
        let mut best: Option<(usize, usize)> = None;
        for (i, b) in blocks.iter().enumerate() {
            let label_terms: Vec<String> = alnum_tokens(split_label(b).0)
                .into_iter()
                .filter(|t| !STOPWORDS.contains(&t.as_str()))
                .collect();
            if label_terms.is_empty() || !label_terms.iter().all(|t| terms.contains(t)) {
                continue;
            }
            if best.is_none_or(|(_, n)| label_terms.len() > n) {
                best = Some((i, label_terms.len()));
            }
        }
        let value = best.and_then(|(i, _)| value_after(&blocks, i));
        let first = alnum_tokens(question).into_iter().next().unwrap_or_default();
        if BOOLEAN_LEADS.contains(&first.as_str()) {
            let yes = value.is_some_and(|v| !NEGATIVE_VALUES.contains(&normalize(&v).as_str()));
            return Some(if yes { "yes" } else { "no" }.to_string());
        }
        value
    }
}

/// Dispatches pruner calls to [`OraclePruner`] and extraction calls to
/// [`OracleExtractor`], answering in the formats the prompts ask for.
#[derive(Debug, Clone, Default)]
pub struct OracleClient {
    pub pruner: OraclePruner,
    pub extractor: OracleExtractor,
}

impl ModelClient for OracleClient {
    fn complete(&self, request: &CompletionRequest) -> Result<String, ClientError> {
        match request.task {
            Task::Prune => {
                let kept = self.pruner.decide(&request.items, &request.query);
                Ok(serde_json::to_string(&kept).expect("vec serializes"))
            }
            Task::Schema => {
                let keys: Vec<String> = match serde_json::from_str::<Value>(&request.query) {
                    Ok(Value::Object(m)) => m.keys().cloned().collect(),
                    _ => return Err(ClientError::Protocol("schema query is not a JSON object".into())),
                };
                let filled = match parse_html(&request.content) {
                    Ok(tree) => self.extractor.fill(&tree, &keys),
                    Err(_) => keys.iter().map(|k| (k.clone(), Value::Null)).collect(),
                };
                Ok(format!(
                    "REASONING: \"values follow their labels\"\n{}",
                    Value::Object(filled)
                ))
            }
            Task::Qa => {
                let answer = parse_html(&request.content)
                    .ok()
                    .and_then(|tree| self.extractor.answer(&tree, &request.query));
                Ok(format!(
                    "REASONING: \"answer follows the matching label\"\n{}",
                    json!({ "answer": answer })
                ))
            }
        }
    }
}
