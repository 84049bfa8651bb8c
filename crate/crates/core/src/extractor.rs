//! Schema filling and question answering over the distilled page.

use std::fmt;

use indexmap::IndexMap;
use serde::de::{Deserializer, MapAccess, Visitor};
use serde::Serialize;
use serde_json::Value;

use crate::chunker::{chunk_blocks, MIN_BUDGET};
use crate::dom::parse_html;
use crate::error::{AxeError, Result};
use crate::model::{parse_extraction, value_to_text, CompletionRequest, ModelClient, Task};
use crate::tokenizer::Tokenizer;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ExtractionQuery {
    /// Flat schema: ordered, unique keys. Input values are ignored.
    Schema { keys: Vec<String> },
    Qa { question: String },
}

struct FlatObject(Vec<(String, Value)>);

impl<'de> serde::Deserialize<'de> for FlatObject {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct V;
        impl<'de> Visitor<'de> for V {
            type Value = FlatObject;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a JSON object")
            }
            fn visit_map<A: MapAccess<'de>>(self, mut map: A) -> std::result::Result<FlatObject, A::Error> {
                let mut out = Vec::new();
                while let Some((k, v)) = map.next_entry::<String, Value>()? {
                    out.push((k, v));
                }
                Ok(FlatObject(out))
            }
        }
        d.deserialize_map(V)
    }
}

impl ExtractionQuery {
    /// Parses a flat JSON schema such as `{"Price": "", "Brand": ""}`.
    pub fn schema_from_json(text: &str) -> Result<ExtractionQuery> {
        let FlatObject(entries) =
            serde_json::from_str(text).map_err(|e| AxeError::InvalidSchema(e.to_string()))?;
        if entries.is_empty() {
            return Err(AxeError::InvalidSchema("schema has no keys".into()));
        }
        let mut keys: Vec<String> = Vec::with_capacity(entries.len());
        for (k, v) in entries {
            if v.is_object() || v.is_array() {
                return Err(AxeError::InvalidSchema(format!("nested value for key {k:?}")));
            }
            if keys.contains(&k) {
                return Err(AxeError::InvalidSchema(format!("duplicate key {k:?}")));
            }
            keys.push(k);
        }
        Ok(ExtractionQuery::Schema { keys })
    }

    pub fn schema<S: Into<String>>(keys: impl IntoIterator<Item = S>) -> Result<ExtractionQuery> {
        let keys: Vec<String> = keys.into_iter().map(Into::into).collect();
        if keys.is_empty() {
            return Err(AxeError::InvalidSchema("schema has no keys".into()));
        }
        if let Some(i) = (1..keys.len()).find(|&i| keys[..i].contains(&keys[i])) {
            return Err(AxeError::InvalidSchema(format!("duplicate key {:?}", keys[i])));
        }
        Ok(ExtractionQuery::Schema { keys })
    }

    pub fn qa(question: impl Into<String>) -> Result<ExtractionQuery> {
        let question = question.into();
        if question.trim().is_empty() {
            return Err(AxeError::EmptyQuery);
        }
        Ok(ExtractionQuery::Qa { question })
    }

    pub fn keys(&self) -> Option<&[String]> {
        match self {
            ExtractionQuery::Schema { keys } => Some(keys),
            ExtractionQuery::Qa { .. } => None,
        }
    }

    /// The text substituted for `{query}`: the schema as a JSON object with
    /// empty values, or the question.
    pub fn prompt_text(&self) -> String {
        match self {
            ExtractionQuery::Schema { keys } => {
                let empty: IndexMap<&str, &str> = keys.iter().map(|k| (k.as_str(), "")).collect();
                serde_json::to_string(&empty).expect("string map serializes")
            }
            ExtractionQuery::Qa { question } => question.clone(),
        }
    }

    fn task(&self) -> Task {
        match self {
            ExtractionQuery::Schema { .. } => Task::Schema,
            ExtractionQuery::Qa { .. } => Task::Qa,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FilledSchema {
    pub values: IndexMap<String, Option<String>>,
    pub reasoning: Option<String>,
    /// Some extractor call could not be parsed after retries.
    pub degraded: bool,
}

impl FilledSchema {
    pub fn all_null(keys: &[String]) -> FilledSchema {
        FilledSchema {
            values: keys.iter().map(|k| (k.clone(), None)).collect(),
            reasoning: None,
            degraded: true,
        }
    }

    pub fn to_json(&self) -> Value {
        Value::Object(
            self.values
                .iter()
                .map(|(k, v)| (k.clone(), v.clone().map(Value::String).unwrap_or(Value::Null)))
                .collect(),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Answer {
    pub answer: Option<String>,
    pub reasoning: Option<String>,
    pub degraded: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtractOptions {
    /// Token limit on one rendered extractor prompt; larger pages are
    /// re-chunked.
    pub budget: usize,
    pub attempts: u32,
    pub temperature: f64,
    pub max_output_tokens: usize,
    pub use_adaptor: bool,
}

impl Default for ExtractOptions {
    fn default() -> Self {
        ExtractOptions {
            budget: crate::chunker::DEFAULT_CHUNK_BUDGET,
            attempts: 3,
            temperature: 0.0,
            max_output_tokens: 512,
            use_adaptor: true,
        }
    }
}

struct PartOutput {
    values: Option<Vec<Option<String>>>,
    reasoning: String,
}

/// Distilled page split so each rendered prompt fits `options.budget`.
fn parts(html: &str, query: &ExtractionQuery, options: &ExtractOptions, tokenizer: &dyn Tokenizer) -> Result<Vec<String>> {
    let template = query.task().template();
    let text = query.prompt_text();
    if tokenizer.count(&template.render(&text, html)?) <= options.budget {
        return Ok(vec![html.to_string()]);
    }
    let overhead = tokenizer.count(&template.render(&text, "")?);
    let budget = options.budget.saturating_sub(overhead).max(MIN_BUDGET);
    let tree = parse_html(html)?;
    Ok(chunk_blocks(&tree, budget, tokenizer)?
        .into_iter()
        .map(|c| c.html)
        .collect())
}

fn call(
    content: &str,
    query: &ExtractionQuery,
    keys: &[String],
    client: &dyn ModelClient,
    options: &ExtractOptions,
) -> Result<PartOutput> {
    let mut request = CompletionRequest::new(query.task(), &query.prompt_text(), content)?;
    request.temperature = options.temperature;
    request.max_output_tokens = options.max_output_tokens;
    request.use_adaptor = options.use_adaptor;
    for _ in 0..options.attempts.max(1) {
        let raw = client.complete(&request)?;
        if let Ok(out) = parse_extraction(&raw, Some(keys)) {
            let values = keys.iter().map(|k| value_to_text(&out.payload[k])).collect();
            return Ok(PartOutput {
                values: Some(values),
                reasoning: out.reasoning,
            });
        }
    }
    Ok(PartOutput {
        values: None,
        reasoning: String::new(),
    })
}

/// Runs every part and merges key-wise: first non-null in document order.
fn run(
    html: &str,
    query: &ExtractionQuery,
    keys: &[String],
    client: &dyn ModelClient,
    options: &ExtractOptions,
    tokenizer: &dyn Tokenizer,
) -> Result<(Vec<Option<String>>, Option<String>, bool)> {
    let mut merged: Vec<Option<String>> = vec![None; keys.len()];
    let mut reasoning = Vec::new();
    let mut degraded = false;
    for part in parts(html, query, options, tokenizer)? {
        let out = call(&part, query, keys, client, options)?;
        let Some(values) = out.values else {
            degraded = true;
            continue;
        };
        if !out.reasoning.is_empty() {
            reasoning.push(out.reasoning);
        }
        for (slot, v) in merged.iter_mut().zip(values) {
            if slot.is_none() {
                *slot = v;
            }
        }
        if merged.iter().all(Option::is_some) {
            break;
        }
    }
    let reasoning = (!reasoning.is_empty()).then(|| reasoning.join("\n"));
    Ok((merged, reasoning, degraded))
}

pub fn extract_schema(
    distilled_html: &str,
    query: &ExtractionQuery,
    client: &dyn ModelClient,
    options: &ExtractOptions,
    tokenizer: &dyn Tokenizer,
) -> Result<FilledSchema> {
    let keys = query
        .keys()
        .ok_or_else(|| AxeError::InvalidSchema("expected a schema query".into()))?;
    let (values, reasoning, degraded) = run(distilled_html, query, keys, client, options, tokenizer)?;
    Ok(FilledSchema {
        values: keys.iter().cloned().zip(values).collect(),
        reasoning,
        degraded,
    })
}

pub fn answer_question(
    distilled_html: &str,
    query: &ExtractionQuery,
    client: &dyn ModelClient,
    options: &ExtractOptions,
    tokenizer: &dyn Tokenizer,
) -> Result<Answer> {
    if query.keys().is_some() {
        return Err(AxeError::InvalidSchema("expected a question".into()));
    }
    let keys = ["answer".to_string()];
    let (mut values, reasoning, degraded) = run(distilled_html, query, &keys, client, options, tokenizer)?;
    Ok(Answer {
        answer: values.pop().flatten(),
        reasoning,
        degraded,
    })
}
