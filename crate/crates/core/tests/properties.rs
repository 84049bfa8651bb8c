mod common;

use axe_core::chunker::{chunk_blocks, decompose, is_atomic, MiniChunk};
use axe_core::dom::{DomTree, NodeData, XPath};
use axe_core::gxr::{find_closest_node, gestalt_ratio, text_chunks};
use axe_core::model::{parse_extraction, parse_prune};
use axe_core::preprocess::{lossless_clean, preprocess};
use axe_core::pruner::merge_kept;
use axe_core::{parse_html, Tokenizer, WordTokenizer};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::*;

fn tree_from_seed(seed: u64, max_nodes: usize) -> DomTree {
    random_tree(&mut ChaCha8Rng::seed_from_u64(seed), max_nodes).1
}

/// Tag/attrs/text shape ignoring comments and whitespace-only text.
#[derive(Debug, PartialEq)]
enum Shape {
    El(String, Vec<(String, String)>, Vec<Shape>),
    Text(String),
}

fn shape(tree: &DomTree, id: usize) -> Option<Shape> {
    let n = tree.node(id).unwrap();
    match &n.data {
        NodeData::Comment(_) => None,
        NodeData::Text(t) => Some(Shape::Text(t.clone())),
        NodeData::Element { tag, attrs } => {
            let mut kids: Vec<Shape> = Vec::new();
            for s in n.children.iter().filter_map(|&c| shape(tree, c)) {
                match (kids.last_mut(), s) {
                    (Some(Shape::Text(prev)), Shape::Text(t)) => prev.push_str(&t),
                    (_, s) => kids.push(s),
                }
            }
            kids.retain(|k| !matches!(k, Shape::Text(t) if t.trim().is_empty()));
            Some(Shape::El(tag.clone(), attrs.clone(), kids))
        }
    }
}

fn body_text(tree: &DomTree) -> String {
    tree.visible_text(tree.body_or_root())
}

fn minichunks(tree: &DomTree, budget: usize) -> Vec<MiniChunk> {
    chunk_blocks(tree, budget, &WordTokenizer)
        .unwrap()
        .iter()
        .flat_map(|c| decompose(c, tree, &WordTokenizer))
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn xpath_round_trip(seed in any::<u64>()) {
        let t = tree_from_seed(seed, 200);
        let mut seen = std::collections::HashSet::new();
        for el in t.elements() {
            let xp = t.xpath_of(el.id).unwrap();
            prop_assert_eq!(t.resolve_id(&xp).unwrap(), el.id);
            let s = xp.to_string();
            prop_assert_eq!(&s, &reference_xpath(&t, el.id));
            prop_assert_eq!(s.parse::<XPath>().unwrap().to_string(), s.clone());
            prop_assert!(seen.insert(s));
        }
    }

    #[test]
    fn serialize_round_trip(seed in any::<u64>()) {
        let t = tree_from_seed(seed, 200);
        let again = parse_html(&t.serialize(t.root_id())).unwrap();
        prop_assert_eq!(shape(&again, again.root_id()), shape(&t, t.root_id()));
    }

    #[test]
    fn lossless_cleaning(seed in any::<u64>()) {
        let t = tree_from_seed(seed, 200);
        let (once, report) = lossless_clean(&t, &WordTokenizer);
        prop_assert_eq!(once.visible_text(once.root_id()), t.visible_text(t.root_id()));
        prop_assert!(report.tokens_after <= report.tokens_before);
        let (twice, _) = lossless_clean(&once, &WordTokenizer);
        prop_assert_eq!(twice, once);
    }

    #[test]
    fn chunk_partition(seed in any::<u64>(), budget in 64usize..400) {
        let t = tree_from_seed(seed, 200);
        let cleaned = preprocess(&t, &WordTokenizer).cleaned;
        for tree in [&t, &cleaned] {
            let chunks = chunk_blocks(tree, budget, &WordTokenizer).unwrap();
            let mut joined = String::new();
            for c in &chunks {
                if c.token_count > budget {
                    prop_assert_eq!(c.roots.len(), 1);
                    prop_assert!(is_atomic(tree, c.roots[0]));
                }
                for m in decompose(c, tree, &WordTokenizer) {
                    prop_assert_eq!(tree.resolve_id(&m.xpath).unwrap(), m.node);
                    prop_assert!(c.roots.iter().any(|&r| r == m.node || tree.is_ancestor(r, m.node)));
                    prop_assert!(m.token_count <= c.token_count);
                    joined.push_str(&tree.visible_text(m.node));
                }
            }
            prop_assert_eq!(strip_ws(&joined), strip_ws(&body_text(tree)));
            prop_assert_eq!(chunk_blocks(tree, budget, &WordTokenizer).unwrap(), chunks);
        }
    }

    #[test]
    fn grounding_matches_brute_force(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (_, t) = random_tree(&mut rng, 200);
        for s in search_strings(&mut rng, &t, 5) {
            let got = find_closest_node(&t, &s);
            let want = brute_force_ground(&t, &s);
            let got_key = got.found.then(|| (
                got.text.clone().unwrap(),
                got.xpath.as_ref().unwrap().to_string(),
                got.sub_index.unwrap(),
            ));
            prop_assert_eq!(&got_key, &want, "search {:?}", s);
            if let Some(node) = got.node {
                prop_assert!(text_chunks(&t, node).contains(got.text.as_ref().unwrap()));
            }
        }
    }

    #[test]
    fn exact_chunk_scores_one(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (_, t) = random_tree(&mut rng, 200);
        for c in all_chunks(&t) {
            prop_assert_eq!(find_closest_node(&t, &c).score, 1.0);
        }
    }

    #[test]
    fn gestalt_matches_reference(a in "[abc ]{0,12}", b in "[abcd]{0,12}") {
        prop_assert!((gestalt_ratio(&a, &b) - reference_ratio(&a, &b)).abs() < 1e-12);
    }

    #[test]
    fn full_retention_merge_is_identity(seed in any::<u64>(), budget in 64usize..400) {
        let t = tree_from_seed(seed, 200);
        let cleaned = preprocess(&t, &WordTokenizer).cleaned;
        let kept: Vec<XPath> = minichunks(&cleaned, budget).into_iter().map(|m| m.xpath).collect();
        let merged = parse_html(&merge_kept(&cleaned, &kept, &WordTokenizer).unwrap()).unwrap();
        prop_assert_eq!(body_text(&merged), body_text(&cleaned));
    }

    #[test]
    fn partial_merge_keeps_order_and_ancestors(seed in any::<u64>(), mask in any::<u64>()) {
        let t = tree_from_seed(seed, 200);
        let cleaned = preprocess(&t, &WordTokenizer).cleaned;
        let minis = minichunks(&cleaned, 64);
        let kept: Vec<&MiniChunk> = minis.iter().enumerate()
            .filter(|(i, _)| mask >> (i % 64) & 1 == 1)
            .map(|(_, m)| m)
            .collect();
        let xps: Vec<XPath> = kept.iter().map(|m| m.xpath.clone()).collect();
        let html = merge_kept(&cleaned, &xps, &WordTokenizer).unwrap();
        let merged = parse_html(&html).unwrap();
        let expected: String = kept.iter().map(|m| strip_ws(&cleaned.visible_text(m.node))).collect();
        prop_assert_eq!(strip_ws(&body_text(&merged)), expected);
        prop_assert!(WordTokenizer.count(&html) <= WordTokenizer.count(&cleaned.serialize(cleaned.root_id())));
        // Attribute-carrying ancestors survive cleaning and must enclose the kept text.
        for m in &kept {
            let text = strip_ws(&cleaned.visible_text(m.node));
            let mut cur = cleaned.node(m.node).unwrap().parent;
            while let Some(a) = cur {
                let anc = cleaned.node(a).unwrap();
                if !anc.attrs().is_empty() {
                    let present = merged.elements().any(|e| {
                        e.tag() == anc.tag()
                            && e.attrs() == anc.attrs()
                            && strip_ws(&merged.visible_text(e.id)).contains(&text)
                    });
                    prop_assert!(present, "ancestor {:?} of {} missing", anc.tag(), m.xpath);
                }
                cur = anc.parent;
            }
        }
    }

    #[test]
    fn prune_parser_ignores_prose(
        before in "[a-zA-Z0-9 ,.:!\n]{0,40}",
        after in r"[a-zA-Z0-9 ,.:!\n\]]{0,40}",
        list in proptest::collection::vec(0usize..50, 0..8),
    ) {
        let array = serde_json::to_string(&list).unwrap();
        let bare = parse_prune(&array, 30).unwrap();
        prop_assert_eq!(parse_prune(&format!("{before}{array}{after}"), 30).unwrap(), bare);
    }

    #[test]
    fn extraction_parser_is_total_on_one_object(
        before in "[a-zA-Z0-9 ,.:\"\n]{0,40}",
        after in "[a-zA-Z0-9 ,.:\n}]{0,40}",
        values in proptest::collection::btree_map("[a-z]{1,6}", proptest::option::of("[ -~]{0,12}"), 1..5),
    ) {
        let object = serde_json::to_string(&values).unwrap();
        let out = parse_extraction(&format!("{before}{object}{after}"), None).unwrap();
        prop_assert_eq!(out.payload, serde_json::to_value(&values).unwrap());
    }
}
