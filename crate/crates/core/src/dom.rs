//! Arena-backed HTML document tree.
//!
//! Parsing goes through html5ever, so malformed markup is repaired the way a
//! browser would repair it. Node ids are preorder positions, which makes
//! "is `a` an ancestor of `b`" a range check and keeps ids stable for the
//! lifetime of an (immutable) tree. Transforms build a [`Fragment`] and
//! produce a fresh tree.

use std::fmt;
use std::str::FromStr;

use html5ever::tendril::TendrilSink;
use html5ever::{parse_document, ParseOpts};
use markup5ever_rcdom::{Handle, NodeData as RcNodeData, RcDom};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{AxeError, Result};

pub type NodeId = usize;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NodeData {
    Element { tag: String, attrs: Vec<(String, String)> },
    Text(String),
    Comment(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DomNode {
    pub id: NodeId,
    pub parent: Option<NodeId>,
    pub children: Vec<NodeId>,
    /// One past the last id in this node's subtree.
    pub end: NodeId,
    pub data: NodeData,
}

impl DomNode {
    pub fn tag(&self) -> Option<&str> {
        match &self.data {
            NodeData::Element { tag, .. } => Some(tag),
            _ => None,
        }
    }

    pub fn attrs(&self) -> &[(String, String)] {
        match &self.data {
            NodeData::Element { attrs, .. } => attrs,
            _ => &[],
        }
    }

    pub fn attr(&self, name: &str) -> Option<&str> {
        self.attrs()
            .iter()
            .find(|(k, _)| k == name)
            .map(|(_, v)| v.as_str())
    }

    pub fn text(&self) -> Option<&str> {
        match &self.data {
            NodeData::Text(t) => Some(t),
            _ => None,
        }
    }

    pub fn is_element(&self) -> bool {
        matches!(self.data, NodeData::Element { .. })
    }

    pub fn is_text(&self) -> bool {
        matches!(self.data, NodeData::Text(_))
    }

    pub fn is_comment(&self) -> bool {
        matches!(self.data, NodeData::Comment(_))
    }

    /// Text node whose content is empty or whitespace only.
    pub fn is_blank_text(&self) -> bool {
        matches!(&self.data, NodeData::Text(t) if is_blank(t))
    }
}

/// Owned tree used to build or rebuild documents.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Fragment {
    Element {
        tag: String,
        attrs: Vec<(String, String)>,
        children: Vec<Fragment>,
    },
    Text(String),
    Comment(String),
}

impl Fragment {
    pub fn element(tag: &str, children: Vec<Fragment>) -> Fragment {
        Fragment::Element {
            tag: tag.to_ascii_lowercase(),
            attrs: Vec::new(),
            children,
        }
    }

    pub fn element_with_attrs(
        tag: &str,
        attrs: Vec<(String, String)>,
        children: Vec<Fragment>,
    ) -> Fragment {
        Fragment::Element {
            tag: tag.to_ascii_lowercase(),
            attrs,
            children,
        }
    }

    pub fn text(s: impl Into<String>) -> Fragment {
        Fragment::Text(s.into())
    }

    pub fn tag(&self) -> Option<&str> {
        match self {
            Fragment::Element { tag, .. } => Some(tag),
            _ => None,
        }
    }

    /// Wraps body content into `html > (head, body)`.
    pub fn document(body_children: Vec<Fragment>) -> Fragment {
        Fragment::element(
            "html",
            vec![
                Fragment::element("head", Vec::new()),
                Fragment::element("body", body_children),
            ],
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DomTree {
    nodes: Vec<DomNode>,
    source_length: usize,
}

impl DomTree {
    /// Builds a tree from an owned fragment. The root must be an element.
    pub fn from_fragment(root: Fragment, source_length: usize) -> Result<DomTree> {
        if root.tag().is_none() {
            return Err(AxeError::NotAnElement(0));
        }
        let mut nodes = Vec::new();
        push_fragment(&mut nodes, root, None);
        Ok(DomTree {
            nodes,
            source_length,
        })
    }

    pub fn root(&self) -> &DomNode {
        &self.nodes[0]
    }

    pub fn root_id(&self) -> NodeId {
        0
    }

    pub fn source_length(&self) -> usize {
        self.source_length
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, id: NodeId) -> Option<&DomNode> {
        self.nodes.get(id)
    }

    fn get(&self, id: NodeId) -> Result<&DomNode> {
        self.nodes.get(id).ok_or(AxeError::UnknownNode(id))
    }

    /// All nodes in document (preorder) order.
    pub fn nodes(&self) -> impl Iterator<Item = &DomNode> {
        self.nodes.iter()
    }

    pub fn elements(&self) -> impl Iterator<Item = &DomNode> {
        self.nodes.iter().filter(|n| n.is_element())
    }

    /// Nodes in the subtree rooted at `id`, including `id`, in document order.
    pub fn subtree(&self, id: NodeId) -> &[DomNode] {
        match self.nodes.get(id) {
            Some(n) => &self.nodes[id..n.end],
            None => &[],
        }
    }

    pub fn is_ancestor(&self, ancestor: NodeId, descendant: NodeId) -> bool {
        match self.nodes.get(ancestor) {
            Some(n) => ancestor < descendant && descendant < n.end,
            None => false,
        }
    }

    pub fn body(&self) -> Option<NodeId> {
        self.root()
            .children
            .iter()
            .copied()
            .find(|&c| self.nodes[c].tag() == Some("body"))
    }

    pub fn body_or_root(&self) -> NodeId {
        self.body().unwrap_or(0)
    }

    pub fn to_fragment(&self, id: NodeId) -> Fragment {
        let node = &self.nodes[id];
        match &node.data {
            NodeData::Element { tag, attrs } => Fragment::Element {
                tag: tag.clone(),
                attrs: attrs.clone(),
                children: node.children.iter().map(|&c| self.to_fragment(c)).collect(),
            },
            NodeData::Text(t) => Fragment::Text(t.clone()),
            NodeData::Comment(c) => Fragment::Comment(c.clone()),
        }
    }

    /// Absolute positional path of an element.
    pub fn xpath_of(&self, id: NodeId) -> Result<XPath> {
        let node = self.get(id)?;
        if !node.is_element() {
            return Err(AxeError::NotAnElement(id));
        }
        let mut steps = Vec::new();
        let mut cur = Some(id);
        while let Some(cid) = cur {
            let n = &self.nodes[cid];
            let tag = n.tag().expect("ancestors are elements");
            let index = match n.parent {
                Some(p) => {
                    1 + self.nodes[p]
                        .children
                        .iter()
                        .take_while(|&&s| s != cid)
                        .filter(|&&s| self.nodes[s].tag() == Some(tag))
                        .count()
                }
                None => 1,
            };
            steps.push(Step {
                tag: tag.to_string(),
                index,
            });
            cur = n.parent;
        }
        steps.reverse();
        Ok(XPath { steps })
    }

    pub fn resolve_xpath(&self, path: &XPath) -> Result<&DomNode> {
        self.resolve_id(path).map(|id| &self.nodes[id])
    }

    pub fn resolve_id(&self, path: &XPath) -> Result<NodeId> {
        let not_found = || AxeError::XPathNotFound(path.to_string());
        let mut steps = path.steps.iter();
        let first = steps.next().ok_or_else(not_found)?;
        if first.index != 1 || self.root().tag() != Some(first.tag.as_str()) {
            return Err(not_found());
        }
        let mut cur = 0;
        for step in steps {
            cur = self.nodes[cur]
                .children
                .iter()
                .copied()
                .filter(|&c| self.nodes[c].tag() == Some(step.tag.as_str()))
                .nth(step.index.checked_sub(1).ok_or_else(not_found)?)
                .ok_or_else(not_found)?;
        }
        Ok(cur)
    }

    /// HTML serialization of a subtree; comments are dropped.
    pub fn serialize(&self, id: NodeId) -> String {
        let mut out = String::new();
        self.serialize_into(id, &mut out);
        out
    }

    fn serialize_into(&self, id: NodeId, out: &mut String) {
        let node = &self.nodes[id];
        match &node.data {
            NodeData::Text(t) => {
                let raw = node
                    .parent
                    .and_then(|p| self.nodes[p].tag())
                    .is_some_and(is_raw_text_tag);
                if raw {
                    out.push_str(t);
                } else {
                    escape_text(t, out);
                }
            }
            NodeData::Comment(_) => {}
            NodeData::Element { tag, attrs } => {
                out.push('<');
                out.push_str(tag);
                for (k, v) in attrs {
                    out.push(' ');
                    out.push_str(k);
                    out.push_str("=\"");
                    escape_attr(v, out);
                    out.push('"');
                }
                out.push('>');
                if is_void_tag(tag) {
                    return;
                }
                if matches!(tag.as_str(), "pre" | "textarea" | "listing") {
                    if let Some(first) = node.children.first() {
                        if self.nodes[*first].text().is_some_and(|t| t.starts_with('\n')) {
                            out.push('\n');
                        }
                    }
                }
                for &c in &node.children {
                    self.serialize_into(c, out);
                }
                out.push_str("</");
                out.push_str(tag);
                out.push('>');
            }
        }
    }

    /// Concatenated text content, not collapsed.
    pub fn raw_text(&self, id: NodeId) -> String {
        self.subtree(id)
            .iter()
            .filter_map(|n| n.text())
            .collect()
    }

    /// Descendant text in document order with whitespace runs collapsed
    /// and the ends trimmed.
    pub fn visible_text(&self, id: NodeId) -> String {
        collapse_whitespace(&self.raw_text(id))
    }
}

fn push_fragment(nodes: &mut Vec<DomNode>, frag: Fragment, parent: Option<NodeId>) -> NodeId {
    let id = nodes.len();
    let (data, children) = match frag {
        Fragment::Element {
            tag,
            attrs,
            children,
        } => (NodeData::Element { tag, attrs }, children),
        Fragment::Text(t) => (NodeData::Text(t), Vec::new()),
        Fragment::Comment(c) => (NodeData::Comment(c), Vec::new()),
    };
    nodes.push(DomNode {
        id,
        parent,
        children: Vec::new(),
        end: id + 1,
        data,
    });
    let mut child_ids = Vec::with_capacity(children.len());
    for c in children {
        child_ids.push(push_fragment(nodes, c, Some(id)));
    }
    let end = nodes.len();
    let node = &mut nodes[id];
    node.children = child_ids;
    node.end = end;
    id
}

/// Parses (possibly malformed) HTML into a tree rooted at `<html>`.
pub fn parse_html(html: &str) -> Result<DomTree> {
    if is_blank(html) {
        return Err(AxeError::EmptyInput);
    }
    let dom = parse_document(RcDom::default(), ParseOpts::default())
        .from_utf8()
        .read_from(&mut html.as_bytes())
        .map_err(|e| AxeError::Io(e.to_string()))?;
    let root = dom
        .document
        .children
        .borrow()
        .iter()
        .find(|h| matches!(h.data, RcNodeData::Element { .. }))
        .cloned()
        .ok_or(AxeError::EmptyInput)?;
    let frag = convert(&root).ok_or(AxeError::EmptyInput)?;
    DomTree::from_fragment(frag, html.chars().count())
}

fn convert(handle: &Handle) -> Option<Fragment> {
    match &handle.data {
        RcNodeData::Element { name, attrs, .. } => {
            let tag = name.local.to_ascii_lowercase().to_string();
            let attrs = attrs
                .borrow()
                .iter()
                .map(|a| (a.name.local.to_ascii_lowercase().to_string(), a.value.to_string()))
                .collect();
            let mut children: Vec<Fragment> = Vec::new();
            for c in handle.children.borrow().iter() {
                let Some(f) = convert(c) else { continue };
                // html5ever already merges adjacent text; dropping nodes
                // (doctype, PIs) can expose new neighbours.
                if let (Some(Fragment::Text(prev)), Fragment::Text(t)) = (children.last_mut(), &f) {
                    prev.push_str(t);
                    continue;
                }
                children.push(f);
            }
            Some(Fragment::Element {
                tag,
                attrs,
                children,
            })
        }
        RcNodeData::Text { contents } => Some(Fragment::Text(contents.borrow().to_string())),
        RcNodeData::Comment { contents } => Some(Fragment::Comment(contents.to_string())),
        _ => None,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Step {
    pub tag: String,
    /// 1-based position among same-tag siblings.
    pub index: usize,
}

/// Absolute XPath with a positional predicate on every step.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct XPath {
    pub steps: Vec<Step>,
}

impl XPath {
    pub fn new(steps: Vec<Step>) -> Result<XPath> {
        if steps.is_empty() {
            return Err(AxeError::InvalidXPath("empty path".into()));
        }
        for s in &steps {
            if s.index == 0 || s.tag.is_empty() || s.tag.contains(['/', '[', ']']) {
                return Err(AxeError::InvalidXPath(format!("bad step {}[{}]", s.tag, s.index)));
            }
        }
        Ok(XPath { steps })
    }

    pub fn depth(&self) -> usize {
        self.steps.len()
    }

    /// True if `self` is a strict prefix of `other`.
    pub fn is_ancestor_of(&self, other: &XPath) -> bool {
        self.steps.len() < other.steps.len() && other.steps.starts_with(&self.steps)
    }
}

impl fmt::Display for XPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in &self.steps {
            write!(f, "/{}[{}]", s.tag, s.index)?;
        }
        Ok(())
    }
}

impl FromStr for XPath {
    type Err = AxeError;

    fn from_str(s: &str) -> Result<XPath> {
        let bad = || AxeError::InvalidXPath(s.to_string());
        let rest = s.strip_prefix('/').ok_or_else(bad)?;
        let mut steps = Vec::new();
        for part in rest.split('/') {
            let (tag, idx) = part
                .strip_suffix(']')
                .and_then(|p| p.split_once('['))
                .ok_or_else(bad)?;
            // Reject "+1", "01" etc. so that printing reproduces the input.
            if idx.is_empty() || !idx.bytes().all(|b| b.is_ascii_digit()) || idx.starts_with('0') {
                return Err(bad());
            }
            let index = idx.parse().map_err(|_| bad())?;
            steps.push(Step {
                tag: tag.to_string(),
                index,
            });
        }
        XPath::new(steps).map_err(|_| bad())
    }
}

impl Serialize for XPath {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for XPath {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<XPath, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

pub fn is_blank(s: &str) -> bool {
    s.chars().all(char::is_whitespace)
}

pub fn collapse_whitespace(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for word in s.split_whitespace() {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(word);
    }
    out
}

pub fn is_void_tag(tag: &str) -> bool {
    matches!(
        tag,
        "area" | "base" | "basefont" | "bgsound" | "br" | "col" | "embed" | "frame" | "hr"
            | "img" | "input" | "keygen" | "link" | "meta" | "param" | "source" | "track" | "wbr"
    )
}

fn is_raw_text_tag(tag: &str) -> bool {
    matches!(
        tag,
        "script" | "style" | "xmp" | "iframe" | "noembed" | "noframes" | "noscript" | "plaintext"
    )
}

fn escape_text(s: &str, out: &mut String) {
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '\u{a0}' => out.push_str("&nbsp;"),
            c => out.push(c),
        }
    }
}

fn escape_attr(s: &str, out: &mut String) {
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '"' => out.push_str("&quot;"),
            '\u{a0}' => out.push_str("&nbsp;"),
            c => out.push(c),
        }
    }
}
