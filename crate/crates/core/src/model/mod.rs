//! Language-model client abstraction, prompt templates and output parsers.
//!
//! All stages talk to a [`ModelClient`]. The live implementation speaks the
//! OpenAI-compatible chat-completion protocol; the oracle clients are
//! deterministic offline stand-ins used for tests and evaluation runs without
//! a model; the scripted client replays recorded responses.

mod http;
mod oracle;
mod parse;
mod scripted;
mod templates;

use std::sync::{Condvar, Mutex};
use std::time::Duration;

pub use http::{HttpChatClient, HttpChatConfig};
pub use oracle::{query_terms, text_blocks, OracleClient, OracleExtractor, OraclePruner};
pub use parse::{parse_extraction, parse_prune, value_to_text, ExtractorOutput, PruneDecision};
pub use scripted::{prompt_hash, FixtureLine, RecordingClient, ScriptedClient};
pub use templates::{PromptTemplate, TemplateName, CONTENT_PLACEHOLDER, QUERY_PLACEHOLDER};

use crate::error::ClientError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Task {
    Prune,
    Schema,
    Qa,
}

impl Task {
    pub fn template(self) -> PromptTemplate {
        match self {
            Task::Prune => PromptTemplate::pruner(),
            Task::Schema => PromptTemplate::schema_extractor(),
            Task::Qa => PromptTemplate::qa_extractor(),
        }
    }
}

/// One completion call. `prompt` is what a real model sees; the structured
/// fields let offline clients answer without re-parsing the prompt.
#[derive(Debug, Clone)]
pub struct CompletionRequest {
    pub task: Task,
    pub prompt: String,
    pub query: String,
    pub content: String,
    /// Pruner calls: the offered mini-chunk HTML, in index order.
    pub items: Vec<String>,
    pub max_output_tokens: usize,
    pub temperature: f64,
    /// Route to the task-specific adaptor model when one is configured.
    pub use_adaptor: bool,
}

impl CompletionRequest {
    pub fn new(task: Task, query: &str, content: &str) -> crate::error::Result<CompletionRequest> {
        Ok(CompletionRequest {
            task,
            prompt: task.template().render(query, content)?,
            query: query.to_string(),
            content: content.to_string(),
            items: Vec::new(),
            max_output_tokens: 512,
            temperature: 0.0,
            use_adaptor: true,
        })
    }
}

pub trait ModelClient: Send + Sync {
    fn complete(&self, request: &CompletionRequest) -> Result<String, ClientError>;
}

impl<C: ModelClient + ?Sized> ModelClient for &C {
    fn complete(&self, request: &CompletionRequest) -> Result<String, ClientError> {
        (**self).complete(request)
    }
}

impl<C: ModelClient + ?Sized> ModelClient for Box<C> {
    fn complete(&self, request: &CompletionRequest) -> Result<String, ClientError> {
        (**self).complete(request)
    }
}

impl<C: ModelClient + ?Sized> ModelClient for std::sync::Arc<C> {
    fn complete(&self, request: &CompletionRequest) -> Result<String, ClientError> {
        (**self).complete(request)
    }
}

/// Bounded retries with capped exponential backoff.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    /// Retries after the first attempt; at most 3.
    pub max_retries: u32,
    pub base_delay: Duration,
    pub max_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_retries: 3,
            base_delay: Duration::from_millis(250),
            max_delay: Duration::from_secs(4),
        }
    }
}

impl RetryPolicy {
    pub fn new(max_retries: u32, base_delay: Duration, max_delay: Duration) -> RetryPolicy {
        RetryPolicy {
            max_retries: max_retries.min(3),
            base_delay,
            max_delay,
        }
    }

    /// Delay before retry number `retry` (0-based).
    pub fn delay(&self, retry: u32) -> Duration {
        let factor = 1u32.checked_shl(retry).unwrap_or(u32::MAX);
        self.base_delay.saturating_mul(factor).min(self.max_delay)
    }

    /// Runs `op` until it succeeds, fails permanently, or retries run out.
    pub fn run<T>(&self, mut op: impl FnMut() -> Result<T, ClientError>) -> Result<T, ClientError> {
        let mut retry = 0;
        loop {
            match op() {
                Err(e) if e.is_transient() && retry < self.max_retries.min(3) => {
                    std::thread::sleep(self.delay(retry));
                    retry += 1;
                }
                other => return other,
            }
        }
    }
}

/// Counting semaphore bounding in-flight requests.
#[derive(Debug)]
pub struct InFlightLimit {
    available: Mutex<usize>,
    freed: Condvar,
}

impl InFlightLimit {
    pub fn new(limit: usize) -> InFlightLimit {
        InFlightLimit {
            available: Mutex::new(limit.max(1)),
            freed: Condvar::new(),
        }
    }

    pub fn acquire(&self) -> InFlightPermit<'_> {
        let mut n = self.available.lock().expect("limit lock");
        while *n == 0 {
            n = self.freed.wait(n).expect("limit lock");
        }
        *n -= 1;
        InFlightPermit { limit: self }
    }
}

pub struct InFlightPermit<'a> {
    limit: &'a InFlightLimit,
}

impl Drop for InFlightPermit<'_> {
    fn drop(&mut self) {
        *self.limit.available.lock().expect("limit lock") += 1;
        self.limit.freed.notify_one();
    }
}
