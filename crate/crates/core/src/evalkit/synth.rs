//! Deterministic synthetic evaluation corpus.
//!
//! Each page is a listing from one of four verticals: a small block of
//! labelled attributes buried in navigation, filters, related-item cards,
//! reviews and footers. Boilerplate text is drawn from vocabularies that
//! share no word with any attribute label, so an ideal pruner can drop all of
//! it. Labels and values sit in separate elements of one atomic block.

use std::path::Path;

use indexmap::IndexMap;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

use super::{run_eval, Dataset, EvalRecord, RecordTask};
use crate::error::{AxeError, Result};
use crate::model::{parse_extraction, CompletionRequest, FixtureLine, OracleClient, RecordingClient, Task};
use crate::pipeline::{Pipeline, PipelineConfig};

pub const DEFAULT_SEED: u64 = 7;
pub const DEFAULT_PAGES: usize = 40;

const LOREM: &[&str] = &[
    "lorem", "ipsum", "dolor", "sit", "amet", "consectetur", "adipiscing", "elit", "sed", "do",
    "eiusmod", "tempor", "incididunt", "ut", "labore", "et", "dolore", "magna", "aliqua", "enim",
    "ad", "minim", "veniam", "quis", "nostrud", "exercitation", "ullamco", "laboris", "nisi",
    "aliquip", "ex", "ea", "commodo", "consequat", "duis", "aute", "irure", "reprehenderit",
    "voluptate", "velit", "esse", "cillum", "fugiat", "nulla", "pariatur", "excepteur", "sint",
    "occaecat", "cupidatat", "non", "proident", "sunt", "culpa", "qui", "officia", "deserunt",
    "mollit", "anim", "id", "est", "laborum", "curabitur", "pretium", "tincidunt", "lacus",
    "gravida", "vulputate", "viverra", "maecenas", "porttitor", "congue", "massa", "fusce",
    "posuere", "malesuada", "nunc", "mauris", "pharetra", "facilisis",
];

const NAV: &[&str] = &[
    "Home", "New Arrivals", "Deals", "Gift Cards", "Help Center", "Stores", "Returns", "Shipping",
    "Track Order", "Careers", "Newsroom", "Blog", "Sitemap", "Privacy", "Terms", "Accessibility",
    "Newsletter", "Sign In", "Account", "Cart", "Wishlist", "Support", "Community", "Partners",
    "Investors", "Sustainability", "Affiliates", "Developers", "Security", "Status", "Feedback",
    "Events", "Rewards", "Student Discount", "Gift Guide", "Clearance", "Trade In", "Financing",
];

const SITES: &[&str] = &["Bramble Market", "Oakfield Online", "Kestrel Hub", "Juniper Exchange", "Quarry Lane"];

struct Vertical {
    section: &'static str,
    keys: [&'static str; 4],
    values: fn(&mut ChaCha8Rng) -> [String; 4],
}

fn pick(rng: &mut ChaCha8Rng, xs: &[&str]) -> String {
    xs.choose(rng).expect("non-empty list").to_string()
}

fn product(rng: &mut ChaCha8Rng) -> [String; 4] {
    let brand = pick(rng, &[
        "Northwind Audio", "Contoso Labs", "Fabrikam Home", "Tailspin Outdoor", "Litware Systems",
        "Adventure Works", "Proseware Digital", "Woodgrove Gear",
    ]);
    let model = format!(
        "{} {} {}",
        pick(rng, &["Aurora", "Summit", "Vertex", "Halcyon", "Nimbus", "Cascade", "Ember"]),
        pick(rng, &["X2", "Pro", "Max", "Lite", "Air", "Studio"]),
        rng.gen_range(100..999)
    );
    let color = pick(rng, &[
        "Desert Titanium", "Midnight Blue", "Forest Green", "Arctic White", "Graphite Gray",
        "Sunset Orange", "Rose Gold",
    ]);
    let price = format!("${},{:03}.{:02}", rng.gen_range(1..4), rng.gen_range(0..1000), rng.gen_range(0..100));
    [brand, model, color, price]
}

fn book(rng: &mut ChaCha8Rng) -> [String; 4] {
    let author = format!(
        "{} {}",
        pick(rng, &["Jane", "Marcus", "Priya", "Tomas", "Helen", "Kofi", "Ingrid", "Rafael"]),
        pick(rng, &["Roe", "Whitfield", "Okafor", "Lindqvist", "Moreau", "Castellano", "Haddad"])
    );
    let publisher = pick(rng, &[
        "Harbor Lane Press", "Blue Heron Books", "Granite Peak Publishing", "Old Mill House",
        "Meridian Editions",
    ]);
    let date = format!(
        "{} {}, {}",
        pick(rng, &["January", "March", "May", "July", "September", "November"]),
        rng.gen_range(1..29),
        rng.gen_range(1990..2025)
    );
    let isbn = format!("978-{}-{:03}-{:05}-{}", rng.gen_range(0..2), rng.gen_range(0..1000), rng.gen_range(0..100000), rng.gen_range(0..10));
    [author, publisher, date, isbn]
}

fn job(rng: &mut ChaCha8Rng) -> [String; 4] {
    let company = pick(rng, &[
        "Blue Yonder Airlines", "Coho Winery", "Wide World Importers", "Alpine Ski House",
        "Lucerne Publishing", "Trey Research", "Fourth Coffee",
    ]);
    let place = pick(rng, &[
        "Portland, Oregon", "Austin, Texas", "Denver, Colorado", "Raleigh, North Carolina",
        "Madison, Wisconsin",
    ]);
    let low = rng.gen_range(50..120);
    let salary = format!("${low},000 - ${},000", low + rng.gen_range(5..30));
    let kind = pick(rng, &["Full time", "Part time", "Contract role", "Temporary assignment"]);
    [company, place, salary, kind]
}

fn property(rng: &mut ChaCha8Rng) -> [String; 4] {
    let address = format!(
        "{} {} {}",
        rng.gen_range(100..9999),
        pick(rng, &["Maple Ridge", "Cedar Hollow", "Willow Creek", "Harbor View", "Pine Crest"]),
        pick(rng, &["Drive", "Lane", "Court", "Road", "Way"])
    );
    let agent = format!(
        "{} {}",
        pick(rng, &["Dana", "Elliot", "Maya", "Trevor", "Noor", "Sofia"]),
        pick(rng, &["Whitaker", "Brennan", "Takahashi", "Lindgren", "Mbeki"])
    );
    let lot = format!("{}.{:02} acres", rng.gen_range(0..3), rng.gen_range(5..100));
    let year = rng.gen_range(1920..2024).to_string();
    [address, agent, lot, year]
}

const VERTICALS: &[Vertical] = &[
    Vertical { section: "Electronics", keys: ["Brand", "Model Name", "Color", "Price"], values: product },
    Vertical { section: "Books", keys: ["Author", "Publisher", "Publication Date", "ISBN"], values: book },
    Vertical { section: "Jobs", keys: ["Company", "Location", "Salary Range", "Employment Type"], values: job },
    Vertical { section: "Homes", keys: ["Address", "Listing Agent", "Lot Size", "Year Built"], values: property },
];

fn lorem(rng: &mut ChaCha8Rng, n: usize) -> String {
    let words: Vec<&str> = (0..n).map(|_| *LOREM.choose(rng).expect("vocabulary")).collect();
    let mut s = words.join(" ");
    if let Some(first) = s.get_mut(0..1) {
        first.make_ascii_uppercase();
    }
    s
}

fn slug(s: &str) -> String {
    s.to_ascii_lowercase().replace(' ', "-")
}

fn nav_list(rng: &mut ChaCha8Rng, n: usize, indent: &str) -> String {
    let mut items: Vec<&str> = NAV.to_vec();
    items.shuffle(rng);
    items
        .iter()
        .take(n)
        .map(|w| format!("{indent}<li><a href=\"/{}\">{w}</a></li>\n", slug(w)))
        .collect()
}

fn spec_block(rng: &mut ChaCha8Rng, keys: &[&str], values: &[String]) -> String {
    let pairs = keys.iter().zip(values);
    match rng.gen_range(0..4) {
        0 => {
            let rows: String = pairs
                .map(|(k, v)| format!("        <tr><th>{k}</th><td>{v}</td></tr>\n"))
                .collect();
            format!("      <table class=\"specs\">\n{rows}      </table>\n")
        }
        1 => {
            let rows: String = pairs
                .map(|(k, v)| format!("        <dt>{k}</dt>\n        <dd>{v}</dd>\n"))
                .collect();
            format!("      <dl class=\"specs\">\n{rows}      </dl>\n")
        }
        2 => {
            let rows: String = pairs
                .map(|(k, v)| {
                    format!(
                        "        <div class=\"spec-row\"><span class=\"label\">{k}:</span> <span class=\"value\">{v}</span></div>\n"
                    )
                })
                .collect();
            format!("      <div class=\"specs\">\n{rows}      </div>\n")
        }
        _ => {
            let rows: String = pairs
                .map(|(k, v)| format!("        <li><strong>{k}</strong> <em>{v}</em></li>\n"))
                .collect();
            format!("      <ul class=\"facts\">\n{rows}      </ul>\n")
        }
    }
}

fn page(rng: &mut ChaCha8Rng, vertical: &Vertical, values: &[String]) -> String {
    let site = pick(rng, SITES);
    let mut h = String::new();
    h.push_str("<!DOCTYPE html>\n<html lang=\"en\">\n<head>\n  <meta charset=\"utf-8\">\n");
    h.push_str(&format!("  <title>{site}</title>\n"));
    h.push_str("  <link rel=\"stylesheet\" href=\"/static/site.css\">\n");
    h.push_str("  <style>.card{display:inline-block;width:180px}.hidden{display:none}</style>\n");
    h.push_str("  <script>window.dataLayer=window.dataLayer||[];function track(e){dataLayer.push(e)}</script>\n");
    h.push_str("</head>\n<body>\n");
    h.push_str(&format!(
        "  <div class=\"cookie-banner\" id=\"cookies\"><p>{}.</p><button onclick=\"track('ok')\">Accept</button></div>\n",
        lorem(rng, 24)
    ));
    h.push_str(&format!(
        "  <header class=\"site-header\">\n    <div class=\"logo\"><a href=\"/\">{site}</a></div>\n    <nav class=\"main-nav\">\n      <ul>\n{}      </ul>\n    </nav>\n",
        nav_list(rng, 14, "        ")
    ));
    h.push_str("    <form class=\"search\" action=\"/search\"><input type=\"text\" name=\"q\" placeholder=\"Search\"><button type=\"submit\">Go</button></form>\n  </header>\n");
    h.push_str(&format!(
        "  <div class=\"breadcrumbs\"><a href=\"/\">Home</a> &gt; <a href=\"/{}\">{}</a></div>\n",
        slug(vertical.section),
        vertical.section
    ));
    h.push_str("  <main>\n    <aside class=\"filters\">\n");
    for _ in 0..rng.gen_range(2..4) {
        let items: String = (0..rng.gen_range(4..7))
            .map(|_| format!("        <li><label><input type=\"checkbox\"> {}</label></li>\n", lorem(rng, 2)))
            .collect();
        h.push_str(&format!("      <h3>{}</h3>\n      <ul>\n{items}      </ul>\n", lorem(rng, 2)));
    }
    h.push_str("    </aside>\n    <section class=\"listing\">\n");
    h.push_str(&format!("      <h1>{}</h1>\n", lorem(rng, 5)));
    h.push_str(&format!("      <div class=\"gallery\"><img src=\"/img/{}.jpg\" alt=\"{}\"></div>\n", rng.gen_range(1000..9999), lorem(rng, 3)));
    h.push_str(&spec_block(rng, &vertical.keys, values));
    h.push_str("      <div class=\"description\">\n");
    for _ in 0..rng.gen_range(3..5) {
        let n = rng.gen_range(40..70);
        h.push_str(&format!("        <p>{}.</p>\n", lorem(rng, n)));
    }
    h.push_str("      </div>\n    </section>\n");
    h.push_str(&format!("    <section class=\"related\">\n      <h2>{}</h2>\n      <div class=\"cards\">\n", lorem(rng, 3)));
    for _ in 0..rng.gen_range(10..14) {
        let id = rng.gen_range(10000..99999);
        h.push_str(&format!(
            "        <div class=\"card\"><a href=\"/item/{id}\"><img src=\"/img/{id}.jpg\" alt=\"{}\"></a><p class=\"card-title\">{}</p><p class=\"card-meta\">{}</p></div>\n",
            lorem(rng, 2),
            lorem(rng, 4),
            lorem(rng, 3)
        ));
    }
    h.push_str("      </div>\n    </section>\n");
    h.push_str(&format!("    <section class=\"reviews\">\n      <h2>{}</h2>\n", lorem(rng, 2)));
    for _ in 0..rng.gen_range(4..7) {
        let n = rng.gen_range(30..60);
        h.push_str(&format!(
            "      <div class=\"review\"><p class=\"who\">{}</p><p>{}.</p><a href=\"#\" class=\"helpful\">{}</a></div>\n",
            lorem(rng, 2),
            lorem(rng, n),
            lorem(rng, 1)
        ));
    }
    h.push_str("    </section>\n  </main>\n  <footer>\n    <div class=\"cols\">\n");
    for _ in 0..4 {
        h.push_str(&format!(
            "      <div class=\"col\">\n        <h4>{}</h4>\n        <ul>\n{}        </ul>\n      </div>\n",
            pick(rng, NAV),
            nav_list(rng, 6, "          ")
        ));
    }
    h.push_str(&format!("    </div>\n    <p class=\"legal\">{}.</p>\n  </footer>\n", lorem(rng, 25)));
    h.push_str("  <script src=\"/static/app.js\" defer></script>\n</body>\n</html>\n");
    h
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCorpus {
    /// Relative path and content of every page.
    pub pages: Vec<(String, String)>,
    pub records: Vec<EvalRecord>,
}

pub fn generate(seed: u64, pages: usize) -> SyntheticCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = SyntheticCorpus {
        pages: Vec::with_capacity(pages),
        records: Vec::with_capacity(pages),
    };
    for i in 0..pages {
        let vertical = &VERTICALS[i % VERTICALS.len()];
        let values = (vertical.values)(&mut rng);
        let html = page(&mut rng, vertical, &values);
        let id = format!("page_{:02}", i + 1);
        let path = format!("pages/{id}.html");
        let schema: IndexMap<String, Value> = vertical.keys.iter().map(|k| (k.to_string(), Value::from(""))).collect();
        let gold = vertical
            .keys
            .iter()
            .zip(&values)
            .map(|(k, v)| (k.to_string(), vec![Some(v.clone())]))
            .collect();
        out.records.push(EvalRecord {
            id,
            page: path.clone().into(),
            task: RecordTask::Schema { schema, gold },
        });
        out.pages.push((path, html));
    }
    out
}

impl SyntheticCorpus {
    pub fn dataset(&self, root: &Path) -> Dataset {
        Dataset {
            root: root.to_path_buf(),
            records: self.records.clone(),
        }
    }

    /// Writes `dataset.jsonl`, the page files and `corrupted_fixture.jsonl`
    /// under `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        let io = |e: std::io::Error| AxeError::Io(format!("{}: {e}", dir.display()));
        std::fs::create_dir_all(dir.join("pages")).map_err(io)?;
        for (path, html) in &self.pages {
            std::fs::write(dir.join(path), html).map_err(io)?;
        }
        let dataset = self.dataset(dir);
        std::fs::write(dir.join("dataset.jsonl"), dataset.to_jsonl()).map_err(io)?;
        let fixture: String = corrupted_fixture(&dataset, &PipelineConfig::default())
            .iter()
            .map(|l| serde_json::to_string(l).expect("fixture line serializes") + "\n")
            .collect();
        std::fs::write(dir.join("corrupted_fixture.jsonl"), fixture).map_err(io)?;
        Ok(())
    }
}

/// Oracle response with a one-character typo injected into every
/// multi-word schema value. Other responses pass through.
pub fn corrupt_response(request: &CompletionRequest, response: String) -> String {
    if request.task != Task::Schema {
        return response;
    }
    let Ok(out) = parse_extraction(&response, None) else {
        return response;
    };
    let Value::Object(mut map) = out.payload else {
        return response;
    };
    for v in map.values_mut() {
        if let Some(typo) = v.as_str().and_then(inject_typo) {
            *v = Value::String(typo);
        }
    }
    format!("REASONING: \"{}\"\n{}", out.reasoning, Value::Object(map))
}

/// Replay fixture of the oracle client with [`corrupt_response`] applied,
/// recorded by running `dataset` under `config`.
pub fn corrupted_fixture(dataset: &Dataset, config: &PipelineConfig) -> Vec<FixtureLine> {
    let recorder = std::sync::Arc::new(RecordingClient::with_rewrite(OracleClient::default(), corrupt_response));
    let pipeline = Pipeline::with_client(config.clone(), Box::new(recorder.clone()));
    run_eval(dataset, &pipeline);
    recorder.lines()
}

/// Replaces one character in the middle of the longest word of a
/// multi-word value; single-word values are returned unchanged (`None`).
pub fn inject_typo(value: &str) -> Option<String> {
    let words: Vec<&str> = value.split_whitespace().collect();
    if words.len() < 2 {
        return None;
    }
    let (wi, word) = words
        .iter()
        .enumerate()
        .max_by_key(|(i, w)| (w.chars().count(), std::cmp::Reverse(*i)))?;
    let chars: Vec<char> = word.chars().collect();
    let mid = chars.len() / 2;
    let c = chars[mid];
    let replacement = if c.is_ascii_digit() {
        char::from(b'0' + (c as u8 - b'0' + 1) % 10)
    } else if c == 'x' {
        'q'
    } else {
        'x'
    };
    let mut typo = chars;
    typo[mid] = replacement;
    let typo: String = typo.into_iter().collect();
    let mut out = String::with_capacity(value.len());
    let mut seen = 0;
    let mut rest = value;
    while let Some(pos) = rest.find(|c: char| !c.is_whitespace()) {
        out.push_str(&rest[..pos]);
        rest = &rest[pos..];
        let end = rest.find(char::is_whitespace).unwrap_or(rest.len());
        out.push_str(if seen == wi { &typo } else { &rest[..end] });
        rest = &rest[end..];
        seen += 1;
    }
    out.push_str(rest);
    Some(out)
}
