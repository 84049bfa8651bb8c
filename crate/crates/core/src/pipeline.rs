//! Configuration and stage composition.
//!
//! Settings are resolved from defaults, then `AXE_*` environment variables,
//! then a TOML config file, then command-line flags; later sources win.

use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Duration;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::chunker::{DEFAULT_CHUNK_BUDGET, DEFAULT_PRUNER_BUDGET, MIN_BUDGET};
use crate::dom::parse_html;
use crate::error::{AxeError, Result};
use crate::extractor::{answer_question, extract_schema, Answer, ExtractOptions, ExtractionQuery, FilledSchema};
use crate::gxr::{ground_schema, GroundedMatch, GroundingOptions, TieRule, DEFAULT_THRESHOLD};
use crate::model::{HttpChatClient, HttpChatConfig, ModelClient, OracleClient, RetryPolicy, ScriptedClient};
use crate::preprocess::{preprocess, CleanReport};
use crate::pruner::{bypass, prune_page, PruneOptions, PruneResult};
use crate::tokenizer::{Tokenizer, WordTokenizer};

pub const DEFAULT_ENDPOINT: &str = "http://localhost:8000/v1";
pub const DEFAULT_MODEL: &str = "axe-backbone";
pub const DEFAULT_API_KEY_ENV: &str = "AXE_API_KEY";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClientKind {
    #[default]
    Live,
    Oracle,
    Scripted,
}

impl FromStr for ClientKind {
    type Err = AxeError;

    fn from_str(s: &str) -> Result<ClientKind> {
        match s.trim().to_ascii_lowercase().as_str() {
            "live" => Ok(ClientKind::Live),
            "oracle" => Ok(ClientKind::Oracle),
            "scripted" => Ok(ClientKind::Scripted),
            other => Err(AxeError::Config(format!("unknown client kind {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PipelineConfig {
    pub endpoint: String,
    pub model: String,
    pub pruner_model: Option<String>,
    pub schema_model: Option<String>,
    pub qa_model: Option<String>,
    /// Name of the environment variable holding the API key.
    pub api_key_env: String,
    pub chunk_budget: usize,
    pub pruner_budget: usize,
    pub gxr_threshold: f64,
    pub no_pruner: bool,
    pub no_gxr: bool,
    pub no_adaptor_prompting: bool,
    pub gxr_lexicographic: bool,
    pub client: ClientKind,
    /// Replay file for the scripted client.
    pub fixture: Option<PathBuf>,
    pub concurrency: usize,
    pub temperature: f64,
    pub timeout_secs: u64,
    pub max_retries: u32,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            endpoint: DEFAULT_ENDPOINT.to_string(),
            model: DEFAULT_MODEL.to_string(),
            pruner_model: None,
            schema_model: None,
            qa_model: None,
            api_key_env: DEFAULT_API_KEY_ENV.to_string(),
            chunk_budget: DEFAULT_CHUNK_BUDGET,
            pruner_budget: DEFAULT_PRUNER_BUDGET,
            gxr_threshold: DEFAULT_THRESHOLD,
            no_pruner: false,
            no_gxr: false,
            no_adaptor_prompting: false,
            gxr_lexicographic: false,
            client: ClientKind::Live,
            fixture: None,
            concurrency: 4,
            temperature: 0.0,
            timeout_secs: 120,
            max_retries: 3,
        }
    }
}

/// A partial set of settings from one source.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigLayer {
    pub endpoint: Option<String>,
    pub model: Option<String>,
    pub pruner_model: Option<String>,
    pub schema_model: Option<String>,
    pub qa_model: Option<String>,
    pub api_key_env: Option<String>,
    pub chunk_budget: Option<usize>,
    pub pruner_budget: Option<usize>,
    pub gxr_threshold: Option<f64>,
    pub no_pruner: Option<bool>,
    pub no_gxr: Option<bool>,
    pub no_adaptor_prompting: Option<bool>,
    pub gxr_lexicographic: Option<bool>,
    pub client: Option<ClientKind>,
    pub fixture: Option<PathBuf>,
    pub concurrency: Option<usize>,
    pub temperature: Option<f64>,
    pub timeout_secs: Option<u64>,
    pub max_retries: Option<u32>,
}

fn env_value<T: FromStr>(get: &dyn Fn(&str) -> Option<String>, name: &str) -> Result<Option<T>> {
    match get(name) {
        None => Ok(None),
        Some(raw) => raw
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| AxeError::Config(format!("{name}: cannot parse {raw:?}"))),
    }
}

fn env_flag(get: &dyn Fn(&str) -> Option<String>, name: &str) -> Result<Option<bool>> {
    match get(name).as_deref().map(str::trim) {
        None => Ok(None),
        Some("1" | "true" | "yes" | "on") => Ok(Some(true)),
        Some("0" | "false" | "no" | "off" | "") => Ok(Some(false)),
        Some(other) => Err(AxeError::Config(format!("{name}: cannot parse {other:?}"))),
    }
}

impl ConfigLayer {
    /// Reads `AXE_<FIELD>` variables through `get`.
    pub fn from_env_with(get: impl Fn(&str) -> Option<String>) -> Result<ConfigLayer> {
        let get: &dyn Fn(&str) -> Option<String> = &get;
        Ok(ConfigLayer {
            endpoint: get("AXE_ENDPOINT"),
            model: get("AXE_MODEL"),
            pruner_model: get("AXE_PRUNER_MODEL"),
            schema_model: get("AXE_SCHEMA_MODEL"),
            qa_model: get("AXE_QA_MODEL"),
            api_key_env: get("AXE_API_KEY_ENV"),
            chunk_budget: env_value(get, "AXE_CHUNK_BUDGET")?,
            pruner_budget: env_value(get, "AXE_PRUNER_BUDGET")?,
            gxr_threshold: env_value(get, "AXE_GXR_THRESHOLD")?,
            no_pruner: env_flag(get, "AXE_NO_PRUNER")?,
            no_gxr: env_flag(get, "AXE_NO_GXR")?,
            no_adaptor_prompting: env_flag(get, "AXE_NO_ADAPTOR_PROMPTING")?,
            gxr_lexicographic: env_flag(get, "AXE_GXR_LEXICOGRAPHIC")?,
            client: env_value(get, "AXE_CLIENT")?,
            fixture: get("AXE_FIXTURE").map(PathBuf::from),
            concurrency: env_value(get, "AXE_CONCURRENCY")?,
            temperature: env_value(get, "AXE_TEMPERATURE")?,
            timeout_secs: env_value(get, "AXE_TIMEOUT_SECS")?,
            max_retries: env_value(get, "AXE_MAX_RETRIES")?,
        })
    }

    pub fn from_env() -> Result<ConfigLayer> {
        Self::from_env_with(|k| std::env::var(k).ok())
    }

    pub fn from_toml(text: &str) -> Result<ConfigLayer> {
        toml::from_str(text).map_err(|e| AxeError::Config(e.to_string()))
    }

    /// Loads a TOML file; relative `fixture` paths resolve against the
    /// file's directory.
    pub fn from_file(path: &Path) -> Result<ConfigLayer> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| AxeError::Io(format!("{}: {e}", path.display())))?;
        let mut layer = Self::from_toml(&text)?;
        if let (Some(f), Some(dir)) = (&layer.fixture, path.parent()) {
            if f.is_relative() {
                layer.fixture = Some(dir.join(f));
            }
        }
        Ok(layer)
    }

    pub fn apply(self, c: &mut PipelineConfig) {
        macro_rules! set {
            ($($f:ident),*) => {$(
                if let Some(v) = self.$f { c.$f = v; }
            )*};
        }
        macro_rules! set_opt {
            ($($f:ident),*) => {$(
                if self.$f.is_some() { c.$f = self.$f; }
            )*};
        }
        set!(
            endpoint, model, api_key_env, chunk_budget, pruner_budget, gxr_threshold, no_pruner, no_gxr,
            no_adaptor_prompting, gxr_lexicographic, client, concurrency, temperature, timeout_secs,
            max_retries
        );
        set_opt!(pruner_model, schema_model, qa_model, fixture);
    }
}

impl PipelineConfig {
    /// Defaults overlaid with each layer in turn.
    pub fn resolve(layers: impl IntoIterator<Item = ConfigLayer>) -> Result<PipelineConfig> {
        let mut c = PipelineConfig::default();
        for layer in layers {
            layer.apply(&mut c);
        }
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("chunk_budget", self.chunk_budget), ("pruner_budget", self.pruner_budget)] {
            if v < MIN_BUDGET {
                return Err(AxeError::Config(format!("{name} must be at least {MIN_BUDGET}, got {v}")));
            }
        }
        if !(0.0..=1.0).contains(&self.gxr_threshold) {
            return Err(AxeError::Config(format!("gxr_threshold must be in [0, 1], got {}", self.gxr_threshold)));
        }
        if self.concurrency == 0 {
            return Err(AxeError::Config("concurrency must be at least 1".into()));
        }
        if !(self.temperature.is_finite() && self.temperature >= 0.0) {
            return Err(AxeError::Config(format!("invalid temperature {}", self.temperature)));
        }
        if self.client == ClientKind::Scripted && self.fixture.is_none() {
            return Err(AxeError::Config("the scripted client needs a fixture file".into()));
        }
        Ok(())
    }

    pub fn prune_options(&self) -> PruneOptions {
        PruneOptions {
            chunk_budget: self.chunk_budget,
            pruner_budget: self.pruner_budget,
            concurrency: self.concurrency,
            temperature: self.temperature,
            use_adaptor: !self.no_adaptor_prompting,
            ..PruneOptions::default()
        }
    }

    pub fn extract_options(&self) -> ExtractOptions {
        ExtractOptions {
            budget: self.chunk_budget,
            temperature: self.temperature,
            use_adaptor: !self.no_adaptor_prompting,
            ..ExtractOptions::default()
        }
    }

    pub fn grounding_options(&self) -> GroundingOptions {
        GroundingOptions {
            threshold: self.gxr_threshold,
            rule: if self.gxr_lexicographic {
                TieRule::Lexicographic
            } else {
                TieRule::Conjunctive
            },
        }
    }

    pub fn http_config(&self) -> HttpChatConfig {
        let mut h = HttpChatConfig::new(&self.endpoint, &self.model);
        h.pruner_model = self.pruner_model.clone();
        h.schema_model = self.schema_model.clone();
        h.qa_model = self.qa_model.clone();
        h.api_key = std::env::var(&self.api_key_env).ok().filter(|k| !k.is_empty());
        h.timeout = Duration::from_secs(self.timeout_secs);
        h.retry = RetryPolicy::new(self.max_retries, Duration::from_millis(500), Duration::from_secs(8));
        h.max_in_flight = self.concurrency;
        h
    }

    pub fn build_client(&self) -> Result<Box<dyn ModelClient>> {
        Ok(match self.client {
            ClientKind::Live => Box::new(HttpChatClient::new(self.http_config())),
            ClientKind::Oracle => Box::new(OracleClient::default()),
            ClientKind::Scripted => {
                let path = self
                    .fixture
                    .as_deref()
                    .ok_or_else(|| AxeError::Config("the scripted client needs a fixture file".into()))?;
                Box::new(ScriptedClient::from_path(path)?)
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum Outcome {
    Schema {
        filled: FilledSchema,
        /// Absent when grounding is disabled.
        grounding: Option<IndexMap<String, GroundedMatch>>,
    },
    Qa {
        answer: Answer,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PageRun {
    pub clean: CleanReport,
    pub prune: PruneResult,
    pub outcome: Outcome,
}

impl PageRun {
    pub fn degraded(&self) -> bool {
        match &self.outcome {
            Outcome::Schema { filled, .. } => filled.degraded,
            Outcome::Qa { answer } => answer.degraded,
        }
    }

    /// The document printed by the CLI: the filled schema with an optional
    /// `_grounding` sidecar, or `{"answer": ...}`.
    pub fn output_json(&self) -> Value {
        match &self.outcome {
            Outcome::Schema { filled, grounding } => {
                let mut out = match filled.to_json() {
                    Value::Object(m) => m,
                    _ => Map::new(),
                };
                if let Some(g) = grounding {
                    out.insert(
                        "_grounding".to_string(),
                        serde_json::to_value(g).expect("grounding serializes"),
                    );
                }
                Value::Object(out)
            }
            Outcome::Qa { answer } => serde_json::json!({ "answer": answer.answer }),
        }
    }
}

pub struct Pipeline {
    config: PipelineConfig,
    client: Box<dyn ModelClient>,
    tokenizer: Box<dyn Tokenizer>,
}

impl std::fmt::Debug for Pipeline {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Pipeline").field("config", &self.config).finish_non_exhaustive()
    }
}

impl Pipeline {
    pub fn new(config: PipelineConfig) -> Result<Pipeline> {
        config.validate()?;
        let client = config.build_client()?;
        Ok(Pipeline::with_client(config, client))
    }

    pub fn with_client(config: PipelineConfig, client: Box<dyn ModelClient>) -> Pipeline {
        Pipeline {
            config,
            client,
            tokenizer: Box::new(WordTokenizer),
        }
    }

    pub fn with_tokenizer(mut self, tokenizer: Box<dyn Tokenizer>) -> Pipeline {
        self.tokenizer = tokenizer;
        self
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    pub fn client(&self) -> &dyn ModelClient {
        self.client.as_ref()
    }

    pub fn tokenizer(&self) -> &dyn Tokenizer {
        self.tokenizer.as_ref()
    }

    /// Preprocessing and pruning only.
    pub fn prune(&self, html: &str, query: &str) -> Result<(CleanReport, PruneResult)> {
        let tree = parse_html(html)?;
        let pre = preprocess(&tree, self.tokenizer());
        let pruned = self.prune_tree(&pre.cleaned, query)?;
        Ok((pre.report, pruned))
    }

    fn prune_tree(&self, cleaned: &crate::dom::DomTree, query: &str) -> Result<PruneResult> {
        if query.trim().is_empty() {
            return Err(AxeError::EmptyQuery);
        }
        if self.config.no_pruner {
            Ok(bypass(cleaned, self.tokenizer()))
        } else {
            prune_page(cleaned, query, self.client(), &self.config.prune_options(), self.tokenizer())
        }
    }

    /// Full run: preprocess, prune, extract or answer, and (schema queries
    /// only) ground values against the noise-stripped source.
    pub fn run(&self, html: &str, query: &ExtractionQuery) -> Result<PageRun> {
        let tree = parse_html(html)?;
        let pre = preprocess(&tree, self.tokenizer());
        let prune = self.prune_tree(&pre.cleaned, &query.prompt_text())?;
        let options = self.config.extract_options();
        let outcome = match query {
            ExtractionQuery::Schema { .. } => {
                let mut filled =
                    extract_schema(&prune.distilled_html, query, self.client(), &options, self.tokenizer())?;
                let grounding = (!self.config.no_gxr)
                    .then(|| ground_schema(&pre.stripped, &mut filled.values, self.config.grounding_options()));
                Outcome::Schema { filled, grounding }
            }
            ExtractionQuery::Qa { .. } => Outcome::Qa {
                answer: answer_question(&prune.distilled_html, query, self.client(), &options, self.tokenizer())?,
            },
        };
        Ok(PageRun {
            clean: pre.report,
            prune,
            outcome,
        })
    }
}
