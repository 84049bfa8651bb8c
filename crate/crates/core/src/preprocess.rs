//! Noise stripping and lossless structural compression.
//!
//! [`strip_noise`] drops executable and presentational machinery.
//! [`lossless_clean`] then removes markup that carries no text: attribute-less
//! wrappers around a single element are unwrapped and empty elements are
//! dropped. Text nodes are never removed or edited, so the visible text of the
//! page is unchanged; whitespace found inside a removed element is hoisted
//! into its parent.

use serde::Serialize;

use crate::dom::{is_blank, DomTree, Fragment};
use crate::tokenizer::Tokenizer;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct CleanReport {
    pub removed_script_nodes: usize,
    pub removed_style_nodes: usize,
    pub merged_wrappers: usize,
    pub removed_empty: usize,
    pub tokens_before: usize,
    pub tokens_after: usize,
}

/// Output of the full preprocessing stage.
#[derive(Debug, Clone)]
pub struct Preprocessed {
    /// Noise removed, structure otherwise intact. XPaths into this tree match
    /// the original page for every surviving element.
    pub stripped: DomTree,
    /// Stripped and losslessly compressed; the input to chunking.
    pub cleaned: DomTree,
    pub report: CleanReport,
}

pub fn preprocess(tree: &DomTree, tokenizer: &dyn Tokenizer) -> Preprocessed {
    let tokens_before = tokenizer.count(&tree.serialize(tree.root_id()));
    let (stripped, scripts, styles) = strip_noise_counted(tree);
    let (cleaned, mut report) = lossless_clean(&stripped, tokenizer);
    report.removed_script_nodes = scripts;
    report.removed_style_nodes = styles;
    report.tokens_before = tokens_before;
    Preprocessed {
        stripped,
        cleaned,
        report,
    }
}

/// Removes `script`, `style`, `link` and `noscript` elements, comments,
/// inline `style` attributes and `on*` event handlers.
pub fn strip_noise(tree: &DomTree) -> DomTree {
    strip_noise_counted(tree).0
}

fn strip_noise_counted(tree: &DomTree) -> (DomTree, usize, usize) {
    let mut scripts = 0;
    let mut styles = 0;
    let root = strip(tree.to_fragment(tree.root_id()), &mut scripts, &mut styles)
        .expect("html root is never noise");
    let out = DomTree::from_fragment(root, tree.source_length()).expect("root stays an element");
    (out, scripts, styles)
}

fn strip(frag: Fragment, scripts: &mut usize, styles: &mut usize) -> Option<Fragment> {
    match frag {
        Fragment::Comment(_) => None,
        Fragment::Text(t) => Some(Fragment::Text(t)),
        Fragment::Element {
            tag,
            attrs,
            children,
        } => {
            match tag.as_str() {
                "script" | "noscript" => {
                    *scripts += 1;
                    return None;
                }
                "style" | "link" => {
                    *styles += 1;
                    return None;
                }
                _ => {}
            }
            let attrs = attrs
                .into_iter()
                .filter(|(k, _)| k != "style" && !k.starts_with("on"))
                .collect();
            let mut kids = Vec::with_capacity(children.len());
            for c in children {
                if let Some(c) = strip(c, scripts, styles) {
                    push_merging_text(&mut kids, c);
                }
            }
            Some(Fragment::Element {
                tag,
                attrs,
                children: kids,
            })
        }
    }
}

/// Collapses attribute-less single-element wrappers and drops empty elements,
/// repeated to a fixpoint (one bottom-up pass reaches it).
pub fn lossless_clean(tree: &DomTree, tokenizer: &dyn Tokenizer) -> (DomTree, CleanReport) {
    let mut report = CleanReport {
        tokens_before: tokenizer.count(&tree.serialize(tree.root_id())),
        ..CleanReport::default()
    };
    let mut out = clean(tree.to_fragment(tree.root_id()), &mut report);
    debug_assert_eq!(out.len(), 1, "html root is protected");
    let cleaned = DomTree::from_fragment(out.remove(0), tree.source_length())
        .expect("root stays an element");
    report.tokens_after = tokenizer.count(&cleaned.serialize(cleaned.root_id()));
    (cleaned, report)
}

/// Elements whose removal would break the document or table/list structure.
fn never_unwrap(tag: &str) -> bool {
    matches!(
        tag,
        "html" | "head" | "body" | "title"
            | "table" | "caption" | "colgroup" | "thead" | "tbody" | "tfoot" | "tr" | "td" | "th"
            | "ul" | "ol" | "dl" | "li" | "dt" | "dd"
            | "pre" | "textarea" | "select" | "option" | "optgroup" | "datalist"
    )
}

/// Elements kept even when they have no attributes and no content.
fn never_remove(tag: &str) -> bool {
    matches!(tag, "html" | "head" | "body" | "br" | "hr" | "td" | "th")
}

fn clean(frag: Fragment, report: &mut CleanReport) -> Vec<Fragment> {
    let Fragment::Element {
        tag,
        attrs,
        children,
    } = frag
    else {
        return vec![frag];
    };
    let mut kids = Vec::with_capacity(children.len());
    for c in children {
        for r in clean(c, report) {
            push_merging_text(&mut kids, r);
        }
    }
    if attrs.is_empty() {
        let has_text = kids
            .iter()
            .any(|k| matches!(k, Fragment::Text(t) if !is_blank(t)));
        let elements = kids.iter().filter(|k| k.tag().is_some()).count();
        if !has_text {
            if elements == 0 && !never_remove(&tag) && !never_unwrap(&tag) {
                report.removed_empty += 1;
                kids.retain(|k| matches!(k, Fragment::Text(_)));
                return kids;
            }
            if elements == 1 && !never_unwrap(&tag) {
                report.merged_wrappers += 1;
                return kids;
            }
        }
    }
    vec![Fragment::Element {
        tag,
        attrs,
        children: kids,
    }]
}

pub(crate) fn push_merging_text(kids: &mut Vec<Fragment>, f: Fragment) {
    if let (Some(Fragment::Text(prev)), Fragment::Text(t)) = (kids.last_mut(), &f) {
        prev.push_str(t);
        return;
    }
    kids.push(f);
}
