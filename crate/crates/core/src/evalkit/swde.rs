//! Best-effort converter from SWDE ground-truth files to the JSONL format.
//!
//! SWDE ships one tab-separated file per (site, attribute):
//!
//! ```text
//! auto<TAB>auto-aol<TAB>price
//! 2000<TAB>...
//! 0000<TAB>1<TAB>$18,995
//! 0001<TAB>2<TAB>$2,500<TAB>$2,950
//! ```
//!
//! The first two lines are headers; each following line holds a page id, a
//! value count and the values (`<NULL>` for none). Pages live next to the
//! ground truth as `<page id>.htm`.

use std::path::Path;

use indexmap::IndexMap;
use serde_json::Value;

use super::{EvalRecord, RecordTask};
use crate::error::{AxeError, Result};

const NULL_MARKER: &str = "<NULL>";

/// Gold values keyed by page.
pub type PageValues = IndexMap<String, Vec<Option<String>>>;

/// Parses one ground-truth file into its attribute name and page → values.
pub fn parse_groundtruth(text: &str) -> Result<(String, PageValues)> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| AxeError::Dataset("empty ground-truth file".into()))?;
    let attribute = header
        .split('\t')
        .nth(2)
        .map(str::trim)
        .filter(|a| !a.is_empty())
        .ok_or_else(|| AxeError::Dataset(format!("bad header {header:?}")))?
        .to_string();
    lines.next();
    let mut pages = IndexMap::new();
    for line in lines.filter(|l| !l.trim().is_empty()) {
        let mut cols = line.split('\t');
        let id = cols.next().unwrap_or_default().trim().to_string();
        let _count = cols.next();
        let values: Vec<Option<String>> = cols
            .map(str::trim)
            .map(|v| (v != NULL_MARKER && !v.is_empty()).then(|| v.to_string()))
            .collect();
        pages.insert(id, if values.is_empty() { vec![None] } else { values });
    }
    Ok((attribute, pages))
}

/// Builds one schema record per page from every `*.txt` ground-truth file
/// in `groundtruth_dir`. `page_prefix` is prepended to `<id>.htm`.
pub fn convert_site(groundtruth_dir: &Path, page_prefix: &str) -> Result<Vec<EvalRecord>> {
    let io = |e: std::io::Error| AxeError::Io(format!("{}: {e}", groundtruth_dir.display()));
    let mut files: Vec<_> = std::fs::read_dir(groundtruth_dir)
        .map_err(io)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "txt"))
        .collect();
    files.sort();
    let mut by_page: IndexMap<String, PageValues> = IndexMap::new();
    for f in files {
        let (attribute, pages) = parse_groundtruth(&std::fs::read_to_string(&f).map_err(io)?)?;
        for (id, values) in pages {
            by_page.entry(id).or_default().insert(attribute.clone(), values);
        }
    }
    by_page.sort_keys();
    Ok(by_page
        .into_iter()
        .map(|(id, gold)| EvalRecord {
            page: format!("{page_prefix}{id}.htm").into(),
            id,
            task: RecordTask::Schema {
                schema: gold.keys().map(|k| (k.clone(), Value::from(""))).collect(),
                gold,
            },
        })
        .collect())
}
