//! Query-driven pruning.
//!
//! Each block chunk is decomposed into mini-chunks which are offered to the
//! pruner model as `index: html` lines. Surviving mini-chunks are merged back
//! into one page (shared ancestors appear once, document order kept) and the
//! result is losslessly cleaned again.

use std::collections::BTreeSet;

use serde::Serialize;

use crate::chunker::{chunk_blocks, decompose, Chunk, MiniChunk};
use crate::dom::{DomTree, Fragment, NodeId, XPath};
use crate::error::Result;
use crate::model::{parse_prune, CompletionRequest, ModelClient, PromptTemplate, PruneDecision, Task};
use crate::par::parallel_map;
use crate::preprocess::lossless_clean;
use crate::tokenizer::Tokenizer;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PruneResult {
    pub kept_xpaths: Vec<XPath>,
    pub distilled_html: String,
    pub tokens_before: usize,
    pub tokens_after: usize,
    pub chunks: usize,
    pub minichunks: usize,
    /// Pruner batches whose output could not be parsed and were kept whole.
    pub fail_open_batches: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PruneOptions {
    pub chunk_budget: usize,
    /// Limit on the rendered pruner prompt; larger mini-chunk lists are
    /// offered in several batches.
    pub pruner_budget: usize,
    /// Calls per batch before failing open.
    pub attempts: u32,
    pub concurrency: usize,
    pub temperature: f64,
    pub max_output_tokens: usize,
    pub use_adaptor: bool,
}

impl Default for PruneOptions {
    fn default() -> Self {
        PruneOptions {
            chunk_budget: crate::chunker::DEFAULT_CHUNK_BUDGET,
            pruner_budget: crate::chunker::DEFAULT_PRUNER_BUDGET,
            attempts: 3,
            concurrency: 4,
            temperature: 0.0,
            max_output_tokens: 256,
            use_adaptor: true,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ChunkDecision {
    pub decision: PruneDecision,
    pub fail_open_batches: usize,
}

fn offer_line(index: usize, html: &str) -> String {
    format!("{index}: {html}")
}

/// Splits mini-chunks into consecutive batches whose rendered prompt stays
/// within `budget` (a single oversized mini-chunk forms its own batch).
fn batches(
    minichunks: &[MiniChunk],
    query: &str,
    budget: usize,
    tokenizer: &dyn Tokenizer,
) -> Result<Vec<std::ops::Range<usize>>> {
    let overhead = tokenizer.count(&PromptTemplate::pruner().render(query, "")?);
    let mut out = Vec::new();
    let mut start = 0;
    let mut used = overhead;
    for (i, m) in minichunks.iter().enumerate() {
        // count(a ++ "\n" ++ b) <= count(a) + count(b) + 1
        let cost = tokenizer.count(&offer_line(i - start, &m.html)) + 1;
        if i > start && used + cost > budget {
            out.push(start..i);
            start = i;
            used = overhead + tokenizer.count(&offer_line(0, &m.html)) + 1;
        } else {
            used += cost;
        }
    }
    if start < minichunks.len() {
        out.push(start..minichunks.len());
    }
    Ok(out)
}

/// Asks the client which mini-chunks of `chunk` are relevant to `query`.
/// Unparseable answers are retried; after `attempts` failures the batch
/// keeps all its mini-chunks. Transport errors are returned.
pub fn prune_chunk(
    chunk: &Chunk,
    minichunks: &[MiniChunk],
    query: &str,
    client: &dyn ModelClient,
    options: &PruneOptions,
    tokenizer: &dyn Tokenizer,
) -> Result<ChunkDecision> {
    debug_assert!(minichunks.iter().all(|m| m.parent_chunk == chunk.index));
    let mut kept = Vec::new();
    let mut fail_open = 0;
    for range in batches(minichunks, query, options.pruner_budget, tokenizer)? {
        let offered = &minichunks[range.clone()];
        let items: Vec<String> = offered.iter().map(|m| m.html.clone()).collect();
        let content = items
            .iter()
            .enumerate()
            .map(|(i, h)| offer_line(i, h))
            .collect::<Vec<_>>()
            .join("\n");
        let mut request = CompletionRequest::new(Task::Prune, query, &content)?;
        request.items = items;
        request.temperature = options.temperature;
        request.max_output_tokens = options.max_output_tokens;
        request.use_adaptor = options.use_adaptor;

        let mut decision = None;
        for _ in 0..options.attempts.max(1) {
            let raw = client.complete(&request)?;
            if let Ok(d) = parse_prune(&raw, offered.len()) {
                decision = Some(d);
                break;
            }
        }
        let decision = decision.unwrap_or_else(|| {
            fail_open += 1;
            PruneDecision::all(offered.len())
        });
        kept.extend(decision.kept_indices.into_iter().map(|i| range.start + i));
    }
    Ok(ChunkDecision {
        decision: PruneDecision { kept_indices: kept },
        fail_open_batches: fail_open,
    })
}

/// Minimal ancestor-closed copy of `tree` holding exactly the kept subtrees,
/// losslessly cleaned and serialized.
pub fn merge_kept(tree: &DomTree, kept: &[XPath], tokenizer: &dyn Tokenizer) -> Result<String> {
    let ids = kept
        .iter()
        .map(|x| tree.resolve_id(x))
        .collect::<Result<BTreeSet<NodeId>>>()?;
    let merged = merge_ids(tree, &ids)?;
    let (cleaned, _) = lossless_clean(&merged, tokenizer);
    Ok(cleaned.serialize(cleaned.root_id()))
}

fn merge_ids(tree: &DomTree, kept: &BTreeSet<NodeId>) -> Result<DomTree> {
    let root = tree.root_id();
    let frag = build(tree, root, kept, true).expect("root is always built");
    DomTree::from_fragment(frag, tree.source_length())
}

fn contains_kept(tree: &DomTree, id: NodeId, kept: &BTreeSet<NodeId>) -> bool {
    let end = tree.node(id).map_or(id, |n| n.end);
    kept.range(id..end).next().is_some()
}

fn build(tree: &DomTree, id: NodeId, kept: &BTreeSet<NodeId>, force: bool) -> Option<Fragment> {
    if kept.contains(&id) {
        return Some(tree.to_fragment(id));
    }
    let node = tree.node(id)?;
    let tag = node.tag()?;
    if !force && !contains_kept(tree, id, kept) {
        return None;
    }
    let is_root = node.parent.is_none();
    let mut children = Vec::new();
    for &c in &node.children {
        let child = tree.node(c)?;
        if child.is_blank_text() {
            children.push(Fragment::Text(child.text().unwrap_or_default().to_string()));
            continue;
        }
        let force_child = is_root && matches!(child.tag(), Some("head" | "body"));
        if let Some(f) = build(tree, c, kept, force_child) {
            children.push(f);
        }
    }
    if is_root && !children.iter().any(|c| c.tag() == Some("body")) {
        children.push(Fragment::element("body", Vec::new()));
    }
    Some(Fragment::Element {
        tag: tag.to_string(),
        attrs: node.attrs().to_vec(),
        children,
    })
}

/// Chunk, decompose, prune every chunk (bounded concurrency), merge.
/// `tree` is the preprocessed page.
pub fn prune_page(
    tree: &DomTree,
    query: &str,
    client: &dyn ModelClient,
    options: &PruneOptions,
    tokenizer: &dyn Tokenizer,
) -> Result<PruneResult> {
    let tokens_before = tokenizer.count(&tree.serialize(tree.root_id()));
    let chunks = chunk_blocks(tree, options.chunk_budget, tokenizer)?;
    let work: Vec<(Chunk, Vec<MiniChunk>)> = chunks
        .into_iter()
        .map(|c| {
            let minis = decompose(&c, tree, tokenizer);
            (c, minis)
        })
        .collect();
    let decisions = parallel_map(&work, options.concurrency, |(chunk, minis)| {
        prune_chunk(chunk, minis, query, client, options, tokenizer)
    });

    let mut kept_xpaths = Vec::new();
    let mut fail_open_batches = 0;
    let mut minichunks = 0;
    for ((_, minis), decision) in work.iter().zip(decisions) {
        let decision = decision?;
        minichunks += minis.len();
        fail_open_batches += decision.fail_open_batches;
        kept_xpaths.extend(
            decision
                .decision
                .kept_indices
                .iter()
                .map(|&i| minis[i].xpath.clone()),
        );
    }
    let distilled_html = merge_kept(tree, &kept_xpaths, tokenizer)?;
    Ok(PruneResult {
        tokens_after: tokenizer.count(&distilled_html),
        kept_xpaths,
        distilled_html,
        tokens_before,
        chunks: work.len(),
        minichunks,
        fail_open_batches,
    })
}

/// Pruning disabled: the whole preprocessed page passes through.
pub fn bypass(tree: &DomTree, tokenizer: &dyn Tokenizer) -> PruneResult {
    let html = tree.serialize(tree.root_id());
    let tokens = tokenizer.count(&html);
    PruneResult {
        kept_xpaths: vec![tree
            .xpath_of(tree.body_or_root())
            .expect("body is an element")],
        distilled_html: html,
        tokens_before: tokens,
        tokens_after: tokens,
        chunks: 0,
        minichunks: 0,
        fail_open_batches: 0,
    }
}
