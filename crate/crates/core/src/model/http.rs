use std::time::Duration;

use serde_json::{json, Value};

use super::{CompletionRequest, InFlightLimit, ModelClient, RetryPolicy, Task};
use crate::error::ClientError;

#[derive(Debug, Clone)]
pub struct HttpChatConfig {
    /// Base URL up to and including the version prefix, e.g.
    /// `http://localhost:8000/v1`.
    pub endpoint: String,
    /// Backbone model id.
    pub model: String,
    /// Adaptor model ids served next to the backbone (LoRA names on vLLM and
    /// similar servers). Unset tasks fall back to `model`.
    pub pruner_model: Option<String>,
    pub schema_model: Option<String>,
    pub qa_model: Option<String>,
    pub api_key: Option<String>,
    pub timeout: Duration,
    pub retry: RetryPolicy,
    pub max_in_flight: usize,
}

impl HttpChatConfig {
    pub fn new(endpoint: impl Into<String>, model: impl Into<String>) -> HttpChatConfig {
        HttpChatConfig {
            endpoint: endpoint.into(),
            model: model.into(),
            pruner_model: None,
            schema_model: None,
            qa_model: None,
            api_key: None,
            timeout: Duration::from_secs(120),
            retry: RetryPolicy::default(),
            max_in_flight: 4,
        }
    }

    fn model_for(&self, task: Task, use_adaptor: bool) -> &str {
        let adaptor = match task {
            Task::Prune => &self.pruner_model,
            Task::Schema => &self.schema_model,
            Task::Qa => &self.qa_model,
        };
        match adaptor {
            Some(m) if use_adaptor => m,
            _ => &self.model,
        }
    }
}

/// OpenAI-compatible `/chat/completions` client. The rendered prompt is sent
/// as a single user message.
#[derive(Debug)]
pub struct HttpChatClient {
    config: HttpChatConfig,
    agent: ureq::Agent,
    limit: InFlightLimit,
}

impl HttpChatClient {
    pub fn new(config: HttpChatConfig) -> HttpChatClient {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(config.timeout))
            .http_status_as_error(false)
            .build()
            .into();
        HttpChatClient {
            limit: InFlightLimit::new(config.max_in_flight),
            config,
            agent,
        }
    }

    pub fn config(&self) -> &HttpChatConfig {
        &self.config
    }

    fn url(&self) -> String {
        format!("{}/chat/completions", self.config.endpoint.trim_end_matches('/'))
    }

    pub fn request_body(&self, request: &CompletionRequest) -> Value {
        json!({
            "model": self.config.model_for(request.task, request.use_adaptor),
            "messages": [{"role": "user", "content": request.prompt}],
            "max_tokens": request.max_output_tokens,
            "temperature": request.temperature,
        })
    }

    fn send_once(&self, body: &str) -> Result<String, ClientError> {
        let mut req = self
            .agent
            .post(&self.url())
            .header("Content-Type", "application/json");
        if let Some(key) = &self.config.api_key {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        let mut resp = req
            .send(body)
            .map_err(|e| ClientError::Transport(e.to_string()))?;
        let status = resp.status().as_u16();
        let text = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| ClientError::Transport(e.to_string()))?;
        if !(200..300).contains(&status) {
            return Err(ClientError::Status { status, body: text });
        }
        extract_content(&text)
    }
}

fn extract_content(text: &str) -> Result<String, ClientError> {
    let v: Value = serde_json::from_str(text).map_err(|e| ClientError::Protocol(e.to_string()))?;
    v.pointer("/choices/0/message/content")
        .and_then(Value::as_str)
        .map(str::to_string)
        .ok_or_else(|| ClientError::Protocol("missing choices[0].message.content".into()))
}

impl ModelClient for HttpChatClient {
    fn complete(&self, request: &CompletionRequest) -> Result<String, ClientError> {
        let body = self.request_body(request).to_string();
        let _permit = self.limit.acquire();
        self.config.retry.run(|| self.send_once(&body))
    }
}
