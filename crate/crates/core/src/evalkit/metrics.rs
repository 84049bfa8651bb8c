//! SQuAD-style answer normalization, token F1 and exact match.
//!
//! A gold entry of `None` (or an empty string) marks "no value"; a null
//! prediction scores 1 against it and 0 against everything else.

use std::collections::HashMap;

const ARTICLES: &[&str] = &["a", "an", "the"];

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

/// Lowercase, drop ASCII punctuation, drop the articles a/an/the, collapse
/// whitespace.
pub fn normalize_answer(s: &str) -> String {
    let lowered: String = s
        .to_lowercase()
        .chars()
        .filter(|c| !c.is_ascii_punctuation())
        .collect();
    let mut out = String::with_capacity(lowered.len());
    let mut word = String::new();
    for c in lowered.chars().chain(std::iter::once(' ')) {
        if is_word_char(c) {
            word.push(c);
            continue;
        }
        if !ARTICLES.contains(&word.as_str()) {
            out.push_str(&word);
        } else {
            out.push(' ');
        }
        word.clear();
        out.push(c);
    }
    out.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn is_null(s: Option<&str>) -> bool {
    s.is_none_or(|s| s.trim().is_empty())
}

fn f1_one(prediction: &str, gold: &str) -> f64 {
    let p = normalize_answer(prediction);
    let g = normalize_answer(gold);
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for t in g.split_whitespace() {
        *counts.entry(t).or_default() += 1;
    }
    let mut same = 0usize;
    for t in p.split_whitespace() {
        if let Some(n) = counts.get_mut(t) {
            if *n > 0 {
                *n -= 1;
                same += 1;
            }
        }
    }
    if same == 0 {
        return 0.0;
    }
    let precision = same as f64 / p.split_whitespace().count() as f64;
    let recall = same as f64 / g.split_whitespace().count() as f64;
    2.0 * precision * recall / (precision + recall)
}

/// Best bag-of-tokens F1 over the gold list.
pub fn token_f1(prediction: Option<&str>, golds: &[Option<String>]) -> f64 {
    let pred_null = is_null(prediction);
    golds
        .iter()
        .map(|g| match (pred_null, is_null(g.as_deref())) {
            (true, true) => 1.0,
            (true, false) | (false, true) => 0.0,
            (false, false) => f1_one(prediction.unwrap_or_default(), g.as_deref().unwrap_or_default()),
        })
        .fold(0.0, f64::max)
}

/// 1.0 iff the normalized prediction equals some normalized gold.
pub fn exact_match(prediction: Option<&str>, golds: &[Option<String>]) -> f64 {
    let pred_null = is_null(prediction);
    let hit = golds.iter().any(|g| match (pred_null, is_null(g.as_deref())) {
        (true, true) => true,
        (false, false) => {
            normalize_answer(prediction.unwrap_or_default()) == normalize_answer(g.as_deref().unwrap_or_default())
        }
        _ => false,
    });
    if hit {
        1.0
    } else {
        0.0
    }
}
