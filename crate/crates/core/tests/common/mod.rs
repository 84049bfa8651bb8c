//! Shared helpers for integration tests: a seeded random page generator and
//! reference implementations written independently of the library.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use axe_core::chunker::{chunk_blocks, decompose, is_atomic};
use axe_core::evalkit::metrics::{exact_match, token_f1};
use axe_core::model::{parse_extraction, parse_prune, PromptTemplate, TemplateName};
use axe_core::preprocess::{lossless_clean, preprocess};
use axe_core::{parse_html, DomTree, NodeId, WordTokenizer};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::Deserialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

pub fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data")
}

/// The hand-written sample pages, sorted by file name.
pub fn sample_pages() -> Vec<(String, String)> {
    let dir = data_dir().join("samples");
    let mut files: Vec<_> = std::fs::read_dir(&dir)
        .expect("samples dir")
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "html"))
        .collect();
    files.sort();
    files
        .into_iter()
        .map(|p| {
            let name = p.file_name().unwrap().to_string_lossy().into_owned();
            (name, std::fs::read_to_string(&p).unwrap())
        })
        .collect()
}

const WORDS: &[&str] = &[
    "apple", "iphone", "pro", "max", "red", "Blue", "price", "$5", "titanium", "desert",
    "gold", "the", "a", "color", "brand", "model", "16", "1,039.99", "Size:", "in", "stock",
    "&amp;", "caf\u{e9}", "x", "NEW",
];

const INLINE: &[&str] = &["span", "b", "i", "em", "strong", "a", "label", "small"];
const BLOCK: &[&str] = &["div", "p", "section", "article", "h2", "aside", "header", "blockquote"];

struct Gen<'a, R: Rng> {
    rng: &'a mut R,
    budget: usize,
}

impl<R: Rng> Gen<'_, R> {
    fn take(&mut self) -> bool {
        if self.budget == 0 {
            return false;
        }
        self.budget -= 1;
        true
    }

    fn words(&mut self) -> String {
        let n = self.rng.gen_range(1..=4);
        let mut s = String::new();
        for i in 0..n {
            if i > 0 {
                s.push_str(if self.rng.gen_bool(0.1) { "\n  " } else { " " });
            }
            s.push_str(WORDS.choose(self.rng).unwrap());
        }
        if self.rng.gen_bool(0.2) {
            s = format!(" {s} ");
        }
        s
    }

    fn attrs(&mut self) -> String {
        match self.rng.gen_range(0..6) {
            0 => format!(" class=\"c{}\"", self.rng.gen_range(0..5)),
            1 => format!(" id=\"n{}\"", self.rng.gen_range(0..100)),
            2 => " style=\"color:red\"".into(),
            3 => " onclick=\"go()\"".into(),
            _ => String::new(),
        }
    }

    fn inline(&mut self, depth: usize, out: &mut String) {
        if !self.take() {
            return;
        }
        match self.rng.gen_range(0..10) {
            0..=4 => out.push_str(&self.words()),
            5 => out.push_str("<br>"),
            6 => out.push_str("<!-- note -->"),
            _ if depth > 5 => out.push_str(&self.words()),
            _ => {
                let tag = *INLINE.choose(self.rng).unwrap();
                let attrs = if tag == "a" { " href=\"/x\"".to_string() } else { self.attrs() };
                out.push_str(&format!("<{tag}{attrs}>"));
                for _ in 0..self.rng.gen_range(0..3) {
                    self.inline(depth + 1, out);
                }
                out.push_str(&format!("</{tag}>"));
            }
        }
    }

    fn block(&mut self, depth: usize, out: &mut String) {
        if !self.take() {
            return;
        }
        let pick = if depth > 4 { 0 } else { self.rng.gen_range(0..12) };
        match pick {
            0..=2 => {
                let tag = if self.rng.gen_bool(0.5) { "p" } else { "h2" };
                out.push_str(&format!("<{tag}{}>", self.attrs()));
                for _ in 0..self.rng.gen_range(1..4) {
                    self.inline(depth + 1, out);
                }
                out.push_str(&format!("</{tag}>"));
            }
            3 => {
                out.push_str("<ul>");
                for _ in 0..self.rng.gen_range(1..4) {
                    if !self.take() {
                        break;
                    }
                    out.push_str("<li>");
                    self.inline(depth + 2, out);
                    out.push_str("</li>");
                }
                out.push_str("</ul>");
            }
            4 => {
                out.push_str("<table><tbody>");
                for _ in 0..self.rng.gen_range(1..3) {
                    if !self.take() {
                        break;
                    }
                    out.push_str("<tr>");
                    for _ in 0..self.rng.gen_range(1..3) {
                        if !self.take() {
                            break;
                        }
                        out.push_str("<td>");
                        self.inline(depth + 3, out);
                        out.push_str("</td>");
                    }
                    out.push_str("</tr>");
                }
                out.push_str("</tbody></table>");
            }
            5 => out.push_str("<script>var a = 1 < 2 && \"</p>\";</script>"),
            6 => out.push_str("<style>p { color: red }</style>"),
            7 => {
                // unclosed and misnested markup
                out.push_str("<p>");
                self.inline(depth + 1, out);
                out.push_str("<b><i>");
                out.push_str(&self.words());
                out.push_str("</b></i>");
            }
            8 => out.push_str(&self.words()),
            _ => {
                let tag = *BLOCK.choose(self.rng).unwrap();
                out.push_str(&format!("<{tag}{}>", self.attrs()));
                for _ in 0..self.rng.gen_range(0..4) {
                    if self.rng.gen_bool(0.3) {
                        self.inline(depth + 1, out);
                    } else {
                        self.block(depth + 1, out);
                    }
                }
                out.push_str(&format!("</{tag}>"));
            }
        }
        if self.rng.gen_bool(0.3) {
            out.push_str("\n  ");
        }
    }
}

/// A random, possibly malformed page of roughly `size` nodes.
pub fn random_html<R: Rng>(rng: &mut R, size: usize) -> String {
    let mut g = Gen { rng, budget: size };
    let mut body = String::new();
    while g.budget > 0 {
        g.block(0, &mut body);
    }
    let title = if g.rng.gen_bool(0.5) { "<title>Shop</title>" } else { "" };
    format!("<!DOCTYPE html><html><head>{title}</head><body>{body}</body></html>")
}

/// A random page whose parsed tree has at most `max_nodes` nodes.
pub fn random_tree<R: Rng>(rng: &mut R, max_nodes: usize) -> (String, DomTree) {
    loop {
        let size = rng.gen_range(1..=max_nodes / 3);
        let html = random_html(rng, size);
        let tree = axe_core::parse_html(&html).expect("generated pages parse");
        if tree.len() <= max_nodes {
            return (html, tree);
        }
    }
}

// ---------------------------------------------------------------------------
// Reference implementations
// ---------------------------------------------------------------------------

/// Longest common block by exhaustive search: longest first, then the
/// smallest start in `a`, then the smallest start in `b`.
fn naive_longest(a: &[char], b: &[char]) -> Option<(usize, usize, usize)> {
    for k in (1..=a.len().min(b.len())).rev() {
        for i in 0..=a.len() - k {
            for j in 0..=b.len() - k {
                if a[i..i + k] == b[j..j + k] {
                    return Some((i, j, k));
                }
            }
        }
    }
    None
}

fn naive_matches(a: &[char], b: &[char]) -> usize {
    match naive_longest(a, b) {
        None => 0,
        Some((i, j, k)) => k + naive_matches(&a[..i], &b[..j]) + naive_matches(&a[i + k..], &b[j + k..]),
    }
}

pub fn reference_ratio(a: &str, b: &str) -> f64 {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    if a.is_empty() && b.is_empty() {
        return 1.0;
    }
    2.0 * naive_matches(&a, &b) as f64 / (a.len() + b.len()) as f64
}

pub fn reference_xpath(tree: &DomTree, id: NodeId) -> String {
    let mut parts = Vec::new();
    let mut cur = id;
    loop {
        let node = tree.node(cur).unwrap();
        let tag = node.tag().unwrap();
        let Some(parent) = node.parent else {
            parts.push(format!("/{tag}[1]"));
            break;
        };
        let siblings = &tree.node(parent).unwrap().children;
        let pos = siblings
            .iter()
            .take_while(|&&s| s != cur)
            .filter(|&&s| tree.node(s).unwrap().tag() == Some(tag))
            .count();
        parts.push(format!("/{tag}[{}]", pos + 1));
        cur = parent;
    }
    parts.reverse();
    parts.concat()
}

fn own_text_runs(tree: &DomTree, id: NodeId) -> Vec<String> {
    let mut runs = vec![String::new()];
    for &c in &tree.node(id).unwrap().children {
        let child = tree.node(c).unwrap();
        if child.is_element() {
            runs.push(String::new());
        } else if let Some(t) = child.text() {
            runs.last_mut().unwrap().push_str(t);
        }
    }
    runs.into_iter()
        .map(|r| r.trim().to_string())
        .filter(|r| !r.is_empty())
        .collect()
}

fn lower_words(s: &str) -> Vec<String> {
    s.split_whitespace().map(str::to_lowercase).collect()
}

/// Exhaustive grounding scan: `(text, xpath, sub_index)` of the winner under
/// the conjunctive update rule, or `None`.
pub fn brute_force_ground(tree: &DomTree, search: &str) -> Option<(String, String, usize)> {
    let search_words = lower_words(search);
    if search_words.is_empty() {
        return None;
    }
    let search_norm = search_words.join(" ");
    let search_set: BTreeSet<&str> = search_words.iter().map(String::as_str).collect();
    let mut best: Option<(String, String, usize)> = None;
    let (mut best_sim, mut best_overlap) = (0.0f64, 0usize);
    for node in tree.nodes().filter(|n| n.is_element()) {
        for (i, chunk) in own_text_runs(tree, node.id).into_iter().enumerate() {
            let words = lower_words(&chunk);
            let chunk_set: BTreeSet<&str> = words.iter().map(String::as_str).collect();
            let overlap = chunk_set.intersection(&search_set).count();
            if overlap == 0 && !words.join(" ").contains(&search_norm) {
                continue;
            }
            let sim = reference_ratio(&chunk, search);
            if sim >= best_sim && overlap >= best_overlap {
                best_sim = sim;
                best_overlap = overlap;
                best = Some((chunk, reference_xpath(tree, node.id), i));
            }
        }
    }
    best
}

/// Every non-blank own-text chunk of every element, in document order.
pub fn all_chunks(tree: &DomTree) -> Vec<String> {
    tree.nodes()
        .filter(|n| n.is_element())
        .flat_map(|n| own_text_runs(tree, n.id))
        .collect()
}

/// Search strings of several kinds for a page: exact chunks, typo'd chunks,
/// substrings, word salad and strings that match nothing.
pub fn search_strings<R: Rng>(rng: &mut R, tree: &DomTree, n: usize) -> Vec<String> {
    let chunks = all_chunks(tree);
    let mut out = Vec::with_capacity(n);
    for k in 0..n {
        let s = match (k % 5, chunks.choose(rng)) {
            (0, Some(c)) => c.clone(),
            (1, Some(c)) => {
                let mut cs: Vec<char> = c.chars().collect();
                let at = rng.gen_range(0..cs.len());
                cs[at] = if cs[at] == 'q' { 'z' } else { 'q' };
                cs.into_iter().collect()
            }
            (2, Some(c)) => {
                let cs: Vec<char> = c.chars().collect();
                let from = rng.gen_range(0..cs.len());
                let to = rng.gen_range(from..=cs.len());
                cs[from..to].iter().collect()
            }
            (4, _) => "zzqq vvww".to_string(),
            _ => (0..rng.gen_range(1..4))
                .map(|_| *WORDS.choose(rng).unwrap())
                .collect::<Vec<_>>()
                .join(" "),
        };
        out.push(s.chars().take(64).collect());
    }
    out
}

pub fn strip_ws(s: &str) -> String {
    s.chars().filter(|c| !c.is_whitespace()).collect()
}

// ---------------------------------------------------------------------------
// Fixture checks shared by the integration tests and the acceptance target.
// Each returns the number of cases checked or a description of the first
// mismatch.
// ---------------------------------------------------------------------------

#[derive(Deserialize)]
struct MetricCase {
    prediction: Option<String>,
    gold: Vec<Option<String>>,
    token_f1: f64,
    exact_match: f64,
}

pub fn check_metric_golden() -> Result<usize, String> {
    let text = std::fs::read_to_string(data_dir().join("metric_golden.json")).map_err(|e| e.to_string())?;
    let cases: Vec<MetricCase> = serde_json::from_str(&text).map_err(|e| e.to_string())?;
    for c in &cases {
        let f = token_f1(c.prediction.as_deref(), &c.gold);
        let em = exact_match(c.prediction.as_deref(), &c.gold);
        if (f - c.token_f1).abs() > 1e-12 || em != c.exact_match {
            return Err(format!(
                "{:?} vs {:?}: got f1={f} em={em}, want f1={} em={}",
                c.prediction, c.gold, c.token_f1, c.exact_match
            ));
        }
    }
    Ok(cases.len())
}

#[derive(Deserialize)]
struct NoisyCase {
    kind: String,
    raw: String,
    #[serde(default)]
    offered: usize,
    #[serde(default)]
    keys: Vec<String>,
    expected: Value,
}

pub fn check_noisy_outputs() -> Result<usize, String> {
    let text = std::fs::read_to_string(data_dir().join("noisy_outputs.json")).map_err(|e| e.to_string())?;
    let cases: Vec<NoisyCase> = serde_json::from_str(&text).map_err(|e| e.to_string())?;
    for c in &cases {
        let want_error = c.expected.get("error").is_some();
        let got = match c.kind.as_str() {
            "prune" => parse_prune(&c.raw, c.offered).map(|d| serde_json::json!({"kept": d.kept_indices})),
            "extraction" => parse_extraction(&c.raw, Some(&c.keys))
                .map(|o| serde_json::json!({"payload": o.payload, "reasoning": o.reasoning})),
            other => return Err(format!("unknown case kind {other}")),
        };
        match (got, want_error) {
            (Err(_), true) => {}
            (Ok(v), false) if v == c.expected => {}
            (got, _) => return Err(format!("{:?}: got {got:?}, want {}", c.raw, c.expected)),
        }
    }
    Ok(cases.len())
}

pub fn check_template_hashes() -> Result<usize, String> {
    let text = std::fs::read_to_string(data_dir().join("template_hashes.json")).map_err(|e| e.to_string())?;
    let want: BTreeMap<String, String> = serde_json::from_str(&text).map_err(|e| e.to_string())?;
    let names = [TemplateName::Pruner, TemplateName::SchemaExtractor, TemplateName::QaExtractor];
    for name in names {
        let body = PromptTemplate::builtin(name).body;
        let got = hex::encode(Sha256::digest(body.as_bytes()));
        if want.get(name.as_str()) != Some(&got) {
            return Err(format!("{name}: sha256 {got}"));
        }
    }
    Ok(names.len())
}

pub fn check_lossless(name: &str, tree: &DomTree) -> Result<(), String> {
    let (once, report) = lossless_clean(tree, &WordTokenizer);
    if once.visible_text(once.root_id()) != tree.visible_text(tree.root_id()) {
        return Err(format!("{name}: visible text changed"));
    }
    if report.tokens_after > report.tokens_before {
        return Err(format!("{name}: tokens {} -> {}", report.tokens_before, report.tokens_after));
    }
    if lossless_clean(&once, &WordTokenizer).0 != once {
        return Err(format!("{name}: not idempotent"));
    }
    Ok(())
}

/// Partition check on the preprocessed page at `budget`.
pub fn check_partition(name: &str, html: &str, budget: usize) -> Result<(), String> {
    let tree = parse_html(html).map_err(|e| format!("{name}: {e}"))?;
    let cleaned = preprocess(&tree, &WordTokenizer).cleaned;
    let chunks = chunk_blocks(&cleaned, budget, &WordTokenizer).map_err(|e| e.to_string())?;
    let mut joined = String::new();
    for c in &chunks {
        for m in decompose(c, &cleaned, &WordTokenizer) {
            if m.token_count > budget && !(c.roots == [m.node] && is_atomic(&cleaned, m.node)) {
                return Err(format!("{name}: mini-chunk {} has {} tokens", m.xpath, m.token_count));
            }
            if cleaned.resolve_id(&m.xpath).ok() != Some(m.node) {
                return Err(format!("{name}: {} does not resolve", m.xpath));
            }
            joined.push_str(&cleaned.visible_text(m.node));
        }
    }
    let page = cleaned.visible_text(cleaned.body_or_root());
    if strip_ws(&joined) != strip_ws(&page) {
        return Err(format!("{name}: mini-chunk text differs from page text at budget {budget}"));
    }
    Ok(())
}
