//! Token-budgeted block chunking and atomic mini-chunk decomposition.

use serde::Serialize;

use crate::dom::{DomTree, NodeId, XPath};
use crate::error::{AxeError, Result};
use crate::tokenizer::Tokenizer;

pub const MIN_BUDGET: usize = 64;
/// Block size used for pruning and extraction context.
pub const DEFAULT_CHUNK_BUDGET: usize = 4000;
/// Rendered-prompt limit for a single pruner call.
pub const DEFAULT_PRUNER_BUDGET: usize = 3000;

const BLOCK_TAGS: &[&str] = &[
    "p", "div", "section", "article", "h1", "h2", "h3", "h4", "h5", "h6", "table", "ul", "ol",
    "li", "dl", "dt", "dd", "pre", "blockquote", "header", "footer", "nav", "aside", "form",
    "figure",
];

const ATOMIC_CONTAINERS: &[&str] = &["table", "ul", "ol", "dl", "pre", "blockquote"];

pub fn is_block_tag(tag: &str) -> bool {
    BLOCK_TAGS.contains(&tag)
}

/// A run of consecutive sibling subtrees that fits the budget together, or a
/// single oversized atomic subtree.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Chunk {
    pub index: usize,
    pub html: String,
    pub token_count: usize,
    /// XPaths of the sibling subtrees making up this chunk, in order.
    pub root_xpaths: Vec<XPath>,
    #[serde(skip)]
    pub roots: Vec<NodeId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MiniChunk {
    pub xpath: XPath,
    pub html: String,
    pub token_count: usize,
    pub parent_chunk: usize,
    #[serde(skip)]
    pub node: NodeId,
}

/// An element that a mini-chunk may end at: a table/list-like container, an
/// element without block-level children, or an element holding text of its
/// own (mixed content cannot be split without orphaning that text).
pub fn is_atomic(tree: &DomTree, id: NodeId) -> bool {
    let node = match tree.node(id) {
        Some(n) if n.is_element() => n,
        _ => return false,
    };
    let tag = node.tag().unwrap_or_default();
    if ATOMIC_CONTAINERS.contains(&tag) {
        return true;
    }
    let mut has_block = false;
    for &c in &node.children {
        let child = tree.node(c).expect("child in tree");
        if child.is_text() && !child.is_blank_text() {
            return true;
        }
        if child.tag().is_some_and(is_block_tag) {
            has_block = true;
        }
    }
    !has_block
}

/// Greedy top-down split of the document body.
///
/// A subtree that fits becomes one chunk. Otherwise its children are walked
/// in order and consecutive siblings are grouped while the group fits; a
/// child that alone exceeds the budget is recursed into, unless it is atomic,
/// in which case it becomes its own oversized chunk. Blank text nodes between
/// elements are not assigned to any chunk.
pub fn chunk_blocks(tree: &DomTree, budget: usize, tokenizer: &dyn Tokenizer) -> Result<Vec<Chunk>> {
    if budget < MIN_BUDGET {
        return Err(AxeError::BudgetTooSmall(budget));
    }
    let mut groups: Vec<Vec<NodeId>> = Vec::new();
    let body = tree.body_or_root();
    let whole = tokenizer.count(&tree.serialize(body));
    if whole <= budget || is_atomic(tree, body) {
        groups.push(vec![body]);
    } else {
        split_children(tree, body, budget, tokenizer, &mut groups);
    }
    groups
        .into_iter()
        .enumerate()
        .map(|(index, roots)| {
            let html: String = roots.iter().map(|&r| tree.serialize(r)).collect();
            let root_xpaths = roots
                .iter()
                .map(|&r| tree.xpath_of(r))
                .collect::<Result<Vec<_>>>()?;
            Ok(Chunk {
                index,
                token_count: tokenizer.count(&html),
                html,
                root_xpaths,
                roots,
            })
        })
        .collect()
}

fn split_children(
    tree: &DomTree,
    parent: NodeId,
    budget: usize,
    tokenizer: &dyn Tokenizer,
    groups: &mut Vec<Vec<NodeId>>,
) {
    let mut current: Vec<NodeId> = Vec::new();
    let mut current_html = String::new();
    let flush = |current: &mut Vec<NodeId>, current_html: &mut String, groups: &mut Vec<Vec<NodeId>>| {
        if !current.is_empty() {
            groups.push(std::mem::take(current));
            current_html.clear();
        }
    };
    for &c in &tree.node(parent).expect("parent in tree").children {
        let child = tree.node(c).expect("child in tree");
        // Only elements can be addressed; non-blank text cannot appear here
        // because mixed-content parents are atomic and never split.
        if !child.is_element() {
            continue;
        }
        let html = tree.serialize(c);
        if tokenizer.count(&html) > budget {
            flush(&mut current, &mut current_html, groups);
            if is_atomic(tree, c) {
                groups.push(vec![c]);
            } else {
                split_children(tree, c, budget, tokenizer, groups);
            }
            continue;
        }
        let candidate = format!("{current_html}{html}");
        if !current.is_empty() && tokenizer.count(&candidate) > budget {
            flush(&mut current, &mut current_html, groups);
            current_html = html;
        } else {
            current_html = candidate;
        }
        current.push(c);
    }
    flush(&mut current, &mut current_html, groups);
}

/// Maximal atomic descendants of the chunk roots, in document order.
pub fn decompose(chunk: &Chunk, tree: &DomTree, tokenizer: &dyn Tokenizer) -> Vec<MiniChunk> {
    let mut nodes = Vec::new();
    for &r in &chunk.roots {
        collect_atomic(tree, r, &mut nodes);
    }
    nodes
        .into_iter()
        .map(|id| {
            let html = tree.serialize(id);
            MiniChunk {
                xpath: tree.xpath_of(id).expect("atomic nodes are elements"),
                token_count: tokenizer.count(&html),
                html,
                parent_chunk: chunk.index,
                node: id,
            }
        })
        .collect()
}

fn collect_atomic(tree: &DomTree, id: NodeId, out: &mut Vec<NodeId>) {
    if is_atomic(tree, id) {
        out.push(id);
        return;
    }
    for &c in &tree.node(id).expect("node in tree").children {
        if tree.node(c).is_some_and(|n| n.is_element()) {
            collect_atomic(tree, c, out);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dom::parse_html;
    use crate::tokenizer::WordTokenizer;

    #[test]
    fn small_page_is_one_chunk() {
        let t = parse_html("<h1>T</h1><p>hello</p>").unwrap();
        let chunks = chunk_blocks(&t, 4000, &WordTokenizer).unwrap();
        assert_eq!(chunks.len(), 1);
        assert_eq!(chunks[0].root_xpaths[0].to_string(), "/html[1]/body[1]");
        assert_eq!(chunks[0].html, t.serialize(t.body().unwrap()));
        assert_eq!(chunks[0].token_count, WordTokenizer.count(&chunks[0].html));
    }

    #[test]
    fn budget_too_small() {
        let t = parse_html("<p>x</p>").unwrap();
        assert!(matches!(
            chunk_blocks(&t, 63, &WordTokenizer),
            Err(AxeError::BudgetTooSmall(63))
        ));
        assert!(chunk_blocks(&t, 64, &WordTokenizer).is_ok());
    }

    #[test]
    fn greedy_grouping_of_paragraphs() {
        // 69 words + 7 markup units = 76 units -> ceil(98.8) = 99 tokens per
        // paragraph. Three together: 228 -> 297 <= 350, four: 304 -> 396.
        let words: Vec<String> = (0..69).map(|i| format!("w{i}")).collect();
        let para = format!("<p>{}</p>", words.join(" "));
        assert_eq!(WordTokenizer::words(&para), 76);
        assert_eq!(WordTokenizer.count(&para), 99);
        let page = para.repeat(10);
        let t = parse_html(&page).unwrap();
        let chunks = chunk_blocks(&t, 350, &WordTokenizer).unwrap();
        let sizes: Vec<usize> = chunks.iter().map(|c| c.roots.len()).collect();
        assert_eq!(sizes, vec![3, 3, 3, 1]);
        assert!(chunks.iter().all(|c| c.token_count <= 350));
        assert_eq!(chunks[1].root_xpaths[0].to_string(), "/html[1]/body[1]/p[4]");
    }

    #[test]
    fn oversized_table_is_its_own_chunk() {
        let rows: String = (0..60).map(|i| format!("<tr><td>cell {i}</td></tr>")).collect();
        let page = format!("<p>intro</p><table>{rows}</table><p>outro</p>");
        let t = parse_html(&page).unwrap();
        let chunks = chunk_blocks(&t, 100, &WordTokenizer).unwrap();
        assert_eq!(chunks.len(), 3);
        assert!(chunks[1].token_count > 100);
        assert!(chunks[1].html.starts_with("<table>"));
    }

    #[test]
    fn table_is_one_minichunk() {
        let t = parse_html("<table><tr><td>a</td><td>b</td></tr></table>").unwrap();
        let chunks = chunk_blocks(&t, 4000, &WordTokenizer).unwrap();
        let minis = decompose(&chunks[0], &t, &WordTokenizer);
        assert_eq!(minis.len(), 1);
        assert_eq!(minis[0].xpath.to_string(), "/html[1]/body[1]/table[1]");
    }

    #[test]
    fn inline_children_do_not_split() {
        let t = parse_html("<div><h1>T</h1><p>a<b>x</b></p></div>").unwrap();
        let chunks = chunk_blocks(&t, 4000, &WordTokenizer).unwrap();
        let minis = decompose(&chunks[0], &t, &WordTokenizer);
        let tags: Vec<String> = minis
            .iter()
            .map(|m| m.xpath.steps.last().unwrap().tag.clone())
            .collect();
        assert_eq!(tags, vec!["h1", "p"]);
        assert_eq!(minis[1].html, "<p>a<b>x</b></p>");
    }

    #[test]
    fn mixed_content_parent_is_atomic() {
        let t = parse_html("<div>lead <p>para</p> tail</div><p>next</p>").unwrap();
        let chunks = chunk_blocks(&t, 4000, &WordTokenizer).unwrap();
        let minis = decompose(&chunks[0], &t, &WordTokenizer);
        assert_eq!(minis.len(), 2);
        assert_eq!(minis[0].xpath.to_string(), "/html[1]/body[1]/div[1]");
    }
}
