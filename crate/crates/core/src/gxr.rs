//! Grounded XPath Resolution.
//!
//! Every element is split into text chunks (its own text, broken at child
//! tags). A generated value is matched against each chunk with two signals:
//! the size of the whitespace-token intersection after normalization, and
//! the Ratcliff-Obershelp ratio of the raw strings. The winning chunk's
//! element XPath and chunk position form the grounding.

use std::collections::HashSet;

use indexmap::IndexMap;
use serde::Serialize;

use crate::dom::{DomTree, NodeId, XPath};

pub const DEFAULT_THRESHOLD: f64 = 0.6;

/// Lowercase, collapse Unicode whitespace runs to one space, trim.
pub fn normalize(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for word in s.split_whitespace() {
        if !out.is_empty() {
            out.push(' ');
        }
        out.extend(word.chars().flat_map(char::to_lowercase));
    }
    out
}

/// Ratcliff-Obershelp similarity `2*M / (|a| + |b|)` over Unicode scalar
/// values, without any junk heuristic. `1.0` when both are empty.
pub fn gestalt_ratio(a: &str, b: &str) -> f64 {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let total = a.len() + b.len();
    if total == 0 {
        return 1.0;
    }
    2.0 * matched_chars(&a, &b) as f64 / total as f64
}

/// Sum of block sizes from recursive longest-common-substring matching.
pub fn matched_chars<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut total = 0;
    let mut stack = vec![(0, a.len(), 0, b.len())];
    while let Some((alo, ahi, blo, bhi)) = stack.pop() {
        let (i, j, k) = longest_match(a, b, alo, ahi, blo, bhi);
        if k == 0 {
            continue;
        }
        total += k;
        if alo < i && blo < j {
            stack.push((alo, i, blo, j));
        }
        if i + k < ahi && j + k < bhi {
            stack.push((i + k, ahi, j + k, bhi));
        }
    }
    total
}

/// Longest common block in `a[alo..ahi]`, `b[blo..bhi]`; ties go to the
/// smallest `i`, then the smallest `j`.
fn longest_match<T: PartialEq>(
    a: &[T],
    b: &[T],
    alo: usize,
    ahi: usize,
    blo: usize,
    bhi: usize,
) -> (usize, usize, usize) {
    let (mut best_i, mut best_j, mut best_k) = (alo, blo, 0);
    // prev[j + 1] = length of the common suffix ending at a[i-1], b[j]
    let width = bhi - blo + 1;
    let mut prev = vec![0usize; width];
    let mut cur = vec![0usize; width];
    for i in alo..ahi {
        for j in blo..bhi {
            let slot = j - blo + 1;
            if a[i] == b[j] {
                let k = prev[slot - 1] + 1;
                cur[slot] = k;
                if k > best_k {
                    best_i = i + 1 - k;
                    best_j = j + 1 - k;
                    best_k = k;
                }
            } else {
                cur[slot] = 0;
            }
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    (best_i, best_j, best_k)
}

/// Per-element text chunks: runs of direct text nodes split at child tags,
/// trimmed, blank runs dropped. Elements without text have no entry.
#[derive(Debug, Clone, Default)]
pub struct TextChunkIndex {
    entries: Vec<(NodeId, Vec<String>)>,
}

impl TextChunkIndex {
    pub fn build(tree: &DomTree) -> TextChunkIndex {
        let mut entries = Vec::new();
        for el in tree.elements() {
            let chunks = text_chunks(tree, el.id);
            if !chunks.is_empty() {
                entries.push((el.id, chunks));
            }
        }
        TextChunkIndex { entries }
    }

    /// `(element, chunks)` pairs in document order.
    pub fn entries(&self) -> &[(NodeId, Vec<String>)] {
        &self.entries
    }

    pub fn chunks_of(&self, id: NodeId) -> &[String] {
        self.entries
            .binary_search_by_key(&id, |(e, _)| *e)
            .map(|i| self.entries[i].1.as_slice())
            .unwrap_or(&[])
    }
}

pub fn text_chunks(tree: &DomTree, id: NodeId) -> Vec<String> {
    let Some(node) = tree.node(id) else {
        return Vec::new();
    };
    let mut chunks = Vec::new();
    let mut run = String::new();
    let mut finish = |run: &mut String| {
        let t = run.trim();
        if !t.is_empty() {
            chunks.push(t.to_string());
        }
        run.clear();
    };
    for &c in &node.children {
        let child = tree.node(c).expect("child in tree");
        if let Some(t) = child.text() {
            run.push_str(t);
        } else if child.is_element() {
            finish(&mut run);
        }
    }
    finish(&mut run);
    chunks
}

/// How candidate updates are accepted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum TieRule {
    /// Accept when `sim >= best_sim` and `overlap >= best_overlap`; later
    /// chunks win ties.
    #[default]
    Conjunctive,
    /// Accept when `(sim, overlap)` is strictly greater lexicographically;
    /// earlier chunks win ties.
    Lexicographic,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroundedMatch {
    pub found: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub xpath: Option<XPath>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sub_index: Option<usize>,
    pub score: f64,
    #[serde(skip)]
    pub overlap: usize,
    #[serde(skip)]
    pub node: Option<NodeId>,
}

impl GroundedMatch {
    pub fn not_found() -> GroundedMatch {
        GroundedMatch {
            found: false,
            text: None,
            xpath: None,
            sub_index: None,
            score: 0.0,
            overlap: 0,
            node: None,
        }
    }
}

fn token_set(normalized: &str) -> HashSet<&str> {
    normalized.split(' ').filter(|t| !t.is_empty()).collect()
}

pub fn find_closest_node(tree: &DomTree, search: &str) -> GroundedMatch {
    find_closest_node_with(tree, &TextChunkIndex::build(tree), search, TieRule::Conjunctive)
}

pub fn find_closest_node_with(
    tree: &DomTree,
    index: &TextChunkIndex,
    search: &str,
    rule: TieRule,
) -> GroundedMatch {
    let search_norm = normalize(search);
    if search_norm.is_empty() {
        return GroundedMatch::not_found();
    }
    let search_tokens = token_set(&search_norm);
    let mut best_score = 0.0f64;
    let mut best_overlap = 0usize;
    let mut best: Option<(NodeId, usize, &str)> = None;

    for (elem, chunks) in index.entries() {
        for (i, chunk) in chunks.iter().enumerate() {
            let chunk_norm = normalize(chunk);
            let overlap = token_set(&chunk_norm).intersection(&search_tokens).count();
            if !(chunk_norm.contains(&search_norm) || overlap > 0) {
                continue;
            }
            // argument order (chunk, search) is part of the contract
            let sim = gestalt_ratio(chunk, search);
            let accept = match rule {
                TieRule::Conjunctive => sim >= best_score && overlap >= best_overlap,
                TieRule::Lexicographic => {
                    best.is_none()
                        || sim > best_score
                        || (sim == best_score && overlap > best_overlap)
                }
            };
            if accept {
                best_score = sim;
                best_overlap = overlap;
                best = Some((*elem, i, chunk));
            }
        }
    }

    match best {
        None => GroundedMatch::not_found(),
        Some((elem, i, text)) => GroundedMatch {
            found: true,
            text: Some(text.to_string()),
            xpath: Some(tree.xpath_of(elem).expect("chunk owners are elements")),
            sub_index: Some(i),
            score: best_score,
            overlap: best_overlap,
            node: Some(elem),
        },
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroundingOptions {
    pub threshold: f64,
    pub rule: TieRule,
}

impl Default for GroundingOptions {
    fn default() -> Self {
        GroundingOptions {
            threshold: DEFAULT_THRESHOLD,
            rule: TieRule::Conjunctive,
        }
    }
}

/// Grounds every non-null value against `tree`, replacing found values with
/// the exact source chunk and nulling values whose best match scores below
/// the threshold. Null values get no entry.
pub fn ground_schema(
    tree: &DomTree,
    values: &mut IndexMap<String, Option<String>>,
    options: GroundingOptions,
) -> IndexMap<String, GroundedMatch> {
    let index = TextChunkIndex::build(tree);
    let mut out = IndexMap::new();
    for (key, value) in values.iter_mut() {
        let Some(v) = value.as_deref() else { continue };
        let mut m = find_closest_node_with(tree, &index, v, options.rule);
        if m.found && m.score < options.threshold {
            m = GroundedMatch::not_found();
        }
        *value = m.text.clone();
        out.insert(key.clone(), m);
    }
    out
}
