//! Datasets, metrics and evaluation runs.
//!
//! A dataset is a JSON-lines file; each line is one [`EvalRecord`] whose
//! `page` path is relative to the dataset file:
//!
//! ```text
//! {"id":"p01","page":"pages/p01.html","schema":{"Price":""},"gold":{"Price":["$5"]}}
//! {"id":"q01","page":"pages/p01.html","question":"Who is the author?","gold":["Jane Roe"]}
//! ```
//!
//! Gold lists hold every acceptable answer; `null` marks "no value".

pub mod metrics;
pub mod swde;
pub mod synth;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::BufRead;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{AxeError, Result};
use crate::extractor::ExtractionQuery;
use crate::par::parallel_map;
use crate::pipeline::{Outcome, PageRun, Pipeline, PipelineConfig};

pub use metrics::{exact_match, normalize_answer, token_f1};

pub const SWEEP_SIZES: [usize; 6] = [500, 1000, 2000, 3000, 4000, 5000];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RecordTask {
    Schema {
        schema: IndexMap<String, Value>,
        gold: IndexMap<String, Vec<Option<String>>>,
    },
    Qa {
        question: String,
        gold: Vec<Option<String>>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub id: String,
    pub page: PathBuf,
    #[serde(flatten)]
    pub task: RecordTask,
}

impl EvalRecord {
    pub fn query(&self) -> Result<ExtractionQuery> {
        match &self.task {
            RecordTask::Schema { schema, .. } => ExtractionQuery::schema_from_json(&serde_json::to_string(schema)?),
            RecordTask::Qa { question, .. } => ExtractionQuery::qa(question.clone()),
        }
    }

    /// Gold answers per scored item; QA records have the single item
    /// `answer`.
    pub fn gold_items(&self) -> Vec<(&str, &[Option<String>])> {
        match &self.task {
            RecordTask::Schema { gold, .. } => gold.iter().map(|(k, v)| (k.as_str(), v.as_slice())).collect(),
            RecordTask::Qa { gold, .. } => vec![("answer", gold.as_slice())],
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(AxeError::Dataset(format!("record {}: {msg}", self.id)));
        if let RecordTask::Schema { schema, gold } = &self.task {
            if let Some(k) = schema.keys().find(|k| !gold.contains_key(*k)) {
                return bad(format!("no gold for key {k:?}"));
            }
            if let Some(k) = gold.keys().find(|k| !schema.contains_key(*k)) {
                return bad(format!("gold key {k:?} is not in the schema"));
            }
        }
        if let Some((k, _)) = self.gold_items().into_iter().find(|(_, g)| g.is_empty()) {
            return bad(format!("empty gold list for {k:?}"));
        }
        self.query().map(|_| ())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    /// Directory page paths are resolved against.
    pub root: PathBuf,
    pub records: Vec<EvalRecord>,
}

impl Dataset {
    pub fn parse(text: &str, root: impl Into<PathBuf>) -> Result<Dataset> {
        let mut records = Vec::new();
        for (n, line) in text.as_bytes().lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let r: EvalRecord = serde_json::from_str(&line)
                .map_err(|e| AxeError::Dataset(format!("line {}: {e}", n + 1)))?;
            r.validate()?;
            records.push(r);
        }
        Ok(Dataset {
            root: root.into(),
            records,
        })
    }

    /// Loads a JSONL dataset and checks that every page file exists.
    pub fn load(path: &Path) -> Result<Dataset> {
        let text = std::fs::read_to_string(path).map_err(|e| AxeError::Io(format!("{}: {e}", path.display())))?;
        let root = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let ds = Self::parse(&text, root)?;
        for r in &ds.records {
            let p = ds.page_path(r);
            if !p.is_file() {
                return Err(AxeError::Dataset(format!("record {}: page {} not found", r.id, p.display())));
            }
        }
        Ok(ds)
    }

    pub fn page_path(&self, record: &EvalRecord) -> PathBuf {
        self.root.join(&record.page)
    }

    pub fn to_jsonl(&self) -> String {
        self.records
            .iter()
            .map(|r| serde_json::to_string(r).expect("record serializes") + "\n")
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ItemScore {
    pub prediction: Option<String>,
    pub token_f1: f64,
    pub exact_match: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecordReport {
    pub id: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub degraded: bool,
    pub items: IndexMap<String, ItemScore>,
    pub token_f1: f64,
    pub exact_match: f64,
    pub tokens_before: usize,
    pub tokens_after: usize,
    pub reduction: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct KeyAggregate {
    pub count: usize,
    pub token_f1: f64,
    pub exact_match: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Aggregate {
    pub records: usize,
    /// Scored (page, attribute) pairs; means below are over these.
    pub items: usize,
    pub token_f1: f64,
    pub exact_match: f64,
    pub errors: usize,
    pub degraded: usize,
    pub mean_tokens_before: f64,
    pub mean_tokens_after: f64,
    /// Mean over records of `1 - after / before`.
    pub mean_reduction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricReport {
    pub no_pruner: bool,
    pub no_gxr: bool,
    pub no_adaptor_prompting: bool,
    pub chunk_budget: usize,
    pub aggregate: Aggregate,
    pub per_key: BTreeMap<String, KeyAggregate>,
    pub records: Vec<RecordReport>,
    /// Not serialized so that reports are byte-stable across runs.
    #[serde(skip)]
    pub wall_time: Duration,
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

fn predictions(run: &PageRun) -> IndexMap<String, Option<String>> {
    match &run.outcome {
        Outcome::Schema { filled, .. } => filled.values.clone(),
        Outcome::Qa { answer } => [("answer".to_string(), answer.answer.clone())].into_iter().collect(),
    }
}

fn score_record(record: &EvalRecord, run: Result<PageRun>) -> RecordReport {
    let (preds, error, degraded, before, after) = match run {
        Ok(run) => (
            predictions(&run),
            None,
            run.degraded(),
            run.prune.tokens_before,
            run.prune.tokens_after,
        ),
        Err(e) => (IndexMap::new(), Some(e.to_string()), false, 0, 0),
    };
    let items: IndexMap<String, ItemScore> = record
        .gold_items()
        .into_iter()
        .map(|(key, golds)| {
            let prediction = preds.get(key).cloned().flatten();
            let scored = error.is_none();
            let score = ItemScore {
                token_f1: if scored { token_f1(prediction.as_deref(), golds) } else { 0.0 },
                exact_match: if scored { exact_match(prediction.as_deref(), golds) } else { 0.0 },
                prediction,
            };
            (key.to_string(), score)
        })
        .collect();
    RecordReport {
        id: record.id.clone(),
        error,
        degraded,
        token_f1: mean(items.values().map(|s| s.token_f1)),
        exact_match: mean(items.values().map(|s| s.exact_match)),
        items,
        tokens_before: before,
        tokens_after: after,
        reduction: if before == 0 { 0.0 } else { 1.0 - after as f64 / before as f64 },
    }
}

pub fn run_record(pipeline: &Pipeline, dataset: &Dataset, record: &EvalRecord) -> RecordReport {
    let run = std::fs::read_to_string(dataset.page_path(record))
        .map_err(|e| AxeError::Io(format!("{}: {e}", dataset.page_path(record).display())))
        .and_then(|html| pipeline.run(&html, &record.query()?));
    score_record(record, run)
}

/// Runs every record through `pipeline` (bounded parallelism) and scores it.
/// Failing records score 0 and carry their error; the run continues.
pub fn run_eval(dataset: &Dataset, pipeline: &Pipeline) -> MetricReport {
    let started = Instant::now();
    let config = pipeline.config();
    let records = parallel_map(&dataset.records, config.concurrency, |r| run_record(pipeline, dataset, r));

    let mut per_key: BTreeMap<String, KeyAggregate> = BTreeMap::new();
    for (k, s) in records.iter().flat_map(|r| r.items.iter()) {
        let e = per_key.entry(k.clone()).or_default();
        e.count += 1;
        e.token_f1 += s.token_f1;
        e.exact_match += s.exact_match;
    }
    for e in per_key.values_mut() {
        e.token_f1 /= e.count as f64;
        e.exact_match /= e.count as f64;
    }
    let ok = || records.iter().filter(|r| r.error.is_none());
    let aggregate = Aggregate {
        records: records.len(),
        items: records.iter().map(|r| r.items.len()).sum(),
        token_f1: mean(records.iter().flat_map(|r| r.items.values().map(|s| s.token_f1))),
        exact_match: mean(records.iter().flat_map(|r| r.items.values().map(|s| s.exact_match))),
        errors: records.iter().filter(|r| r.error.is_some()).count(),
        degraded: records.iter().filter(|r| r.degraded).count(),
        mean_tokens_before: mean(ok().map(|r| r.tokens_before as f64)),
        mean_tokens_after: mean(ok().map(|r| r.tokens_after as f64)),
        mean_reduction: mean(ok().map(|r| r.reduction)),
    };
    MetricReport {
        no_pruner: config.no_pruner,
        no_gxr: config.no_gxr,
        no_adaptor_prompting: config.no_adaptor_prompting,
        chunk_budget: config.chunk_budget,
        aggregate,
        per_key,
        records,
        wall_time: started.elapsed(),
    }
}

impl MetricReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    /// Aligned plain-text summary.
    pub fn to_table(&self) -> String {
        let id_w = self.records.iter().map(|r| r.id.len()).chain([6]).max().unwrap_or(6);
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:<id_w$}  {:>7}  {:>7}  {:>8}  {:>8}  {:>8}  note",
            "record", "F1", "EM", "before", "after", "reduced"
        );
        for r in &self.records {
            let note = match (&r.error, r.degraded) {
                (Some(e), _) => format!("error: {e}"),
                (None, true) => "degraded".to_string(),
                _ => String::new(),
            };
            let _ = writeln!(
                s,
                "{:<id_w$}  {:>7.4}  {:>7.4}  {:>8}  {:>8}  {:>7.1}%  {note}",
                r.id,
                r.token_f1,
                r.exact_match,
                r.tokens_before,
                r.tokens_after,
                r.reduction * 100.0
            );
        }
        let a = &self.aggregate;
        let _ = writeln!(s);
        let key_w = self.per_key.keys().map(String::len).chain([3]).max().unwrap_or(3);
        let _ = writeln!(s, "{:<key_w$}  {:>5}  {:>7}  {:>7}", "key", "n", "F1", "EM");
        for (k, e) in &self.per_key {
            let _ = writeln!(s, "{:<key_w$}  {:>5}  {:>7.4}  {:>7.4}", k, e.count, e.token_f1, e.exact_match);
        }
        let _ = writeln!(s);
        let _ = writeln!(s, "records        {}", a.records);
        let _ = writeln!(s, "items          {}", a.items);
        let _ = writeln!(s, "token F1       {:.4}", a.token_f1);
        let _ = writeln!(s, "exact match    {:.4}", a.exact_match);
        let _ = writeln!(s, "errors         {}", a.errors);
        let _ = writeln!(s, "degraded       {}", a.degraded);
        let _ = writeln!(s, "tokens before  {:.1}", a.mean_tokens_before);
        let _ = writeln!(s, "tokens after   {:.1}", a.mean_tokens_after);
        let _ = writeln!(s, "reduction      {:.1}%", a.mean_reduction * 100.0);
        let _ = writeln!(s, "wall time      {:.2}s", self.wall_time.as_secs_f64());
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub chunk_budget: usize,
    pub token_f1: f64,
    pub exact_match: f64,
    pub mean_tokens_after: f64,
    pub mean_reduction: f64,
    pub errors: usize,
}

/// Evaluates the dataset once per chunk budget; `make` builds the pipeline
/// for each configuration.
pub fn chunk_size_sweep(
    dataset: &Dataset,
    base: &PipelineConfig,
    sizes: &[usize],
    make: impl Fn(PipelineConfig) -> Result<Pipeline>,
) -> Result<Vec<SweepRow>> {
    sizes
        .iter()
        .map(|&size| {
            let config = PipelineConfig {
                chunk_budget: size,
                ..base.clone()
            };
            config.validate()?;
            let report = run_eval(dataset, &make(config)?);
            Ok(SweepRow {
                chunk_budget: size,
                token_f1: report.aggregate.token_f1,
                exact_match: report.aggregate.exact_match,
                mean_tokens_after: report.aggregate.mean_tokens_after,
                mean_reduction: report.aggregate.mean_reduction,
                errors: report.aggregate.errors,
            })
        })
        .collect()
}

pub fn sweep_csv(rows: &[SweepRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| AxeError::Io(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| AxeError::Io(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}
