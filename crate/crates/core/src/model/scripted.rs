use std::collections::HashMap;
use std::io::{BufRead, Write};
use std::path::Path;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{CompletionRequest, ModelClient};
use crate::error::{AxeError, ClientError, Result};

/// Hex SHA-256 of the rendered prompt.
pub fn prompt_hash(prompt: &str) -> String {
    hex::encode(Sha256::digest(prompt.as_bytes()))
}

/// One line of a replay fixture file (JSON lines).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixtureLine {
    pub prompt_hash: String,
    pub response: String,
}

/// Replays recorded responses keyed by prompt hash.
#[derive(Debug, Clone, Default)]
pub struct ScriptedClient {
    responses: HashMap<String, String>,
}

impl ScriptedClient {
    pub fn from_lines(lines: impl IntoIterator<Item = FixtureLine>) -> ScriptedClient {
        ScriptedClient {
            responses: lines
                .into_iter()
                .map(|l| (l.prompt_hash, l.response))
                .collect(),
        }
    }

    pub fn from_reader(reader: impl BufRead) -> Result<ScriptedClient> {
        let mut lines = Vec::new();
        for (n, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let parsed: FixtureLine = serde_json::from_str(&line)
                .map_err(|e| AxeError::Dataset(format!("fixture line {}: {e}", n + 1)))?;
            lines.push(parsed);
        }
        Ok(Self::from_lines(lines))
    }

    pub fn from_path(path: &Path) -> Result<ScriptedClient> {
        let f = std::fs::File::open(path)
            .map_err(|e| AxeError::Io(format!("{}: {e}", path.display())))?;
        Self::from_reader(std::io::BufReader::new(f))
    }

    pub fn len(&self) -> usize {
        self.responses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.responses.is_empty()
    }
}

impl ModelClient for ScriptedClient {
    fn complete(&self, request: &CompletionRequest) -> Result<String, ClientError> {
        let hash = prompt_hash(&request.prompt);
        self.responses
            .get(&hash)
            .cloned()
            .ok_or(ClientError::NoFixture(hash))
    }
}

type Rewrite = dyn Fn(&CompletionRequest, String) -> String + Send + Sync;

/// Wraps a client and records every exchange, optionally rewriting the
/// response first (used to build corrupted-prediction fixtures).
pub struct RecordingClient<C> {
    inner: C,
    rewrite: Option<Box<Rewrite>>,
    log: Mutex<Vec<FixtureLine>>,
}

impl<C: ModelClient> RecordingClient<C> {
    pub fn new(inner: C) -> RecordingClient<C> {
        RecordingClient {
            inner,
            rewrite: None,
            log: Mutex::new(Vec::new()),
        }
    }

    pub fn with_rewrite(
        inner: C,
        rewrite: impl Fn(&CompletionRequest, String) -> String + Send + Sync + 'static,
    ) -> RecordingClient<C> {
        RecordingClient {
            inner,
            rewrite: Some(Box::new(rewrite)),
            log: Mutex::new(Vec::new()),
        }
    }

    /// Recorded lines sorted by hash, duplicates removed.
    pub fn lines(&self) -> Vec<FixtureLine> {
        let mut lines = self.log.lock().expect("log lock").clone();
        lines.sort_by(|a, b| a.prompt_hash.cmp(&b.prompt_hash));
        lines.dedup_by(|a, b| a.prompt_hash == b.prompt_hash);
        lines
    }

    pub fn write_jsonl(&self, mut out: impl Write) -> std::io::Result<()> {
        for line in self.lines() {
            serde_json::to_writer(&mut out, &line)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}

impl<C: ModelClient> ModelClient for RecordingClient<C> {
    fn complete(&self, request: &CompletionRequest) -> Result<String, ClientError> {
        let mut response = self.inner.complete(request)?;
        if let Some(f) = &self.rewrite {
            response = f(request, response);
        }
        self.log.lock().expect("log lock").push(FixtureLine {
            prompt_hash: prompt_hash(&request.prompt),
            response: response.clone(),
        });
        Ok(response)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{OracleClient, Task};

    #[test]
    fn record_then_replay() {
        let rec = RecordingClient::new(OracleClient::default());
        let req = CompletionRequest::new(Task::Qa, "What is the price?", "<p>Price: $5</p>").unwrap();
        let live = rec.complete(&req).unwrap();
        let mut buf = Vec::new();
        rec.write_jsonl(&mut buf).unwrap();
        let replay = ScriptedClient::from_reader(&buf[..]).unwrap();
        assert_eq!(replay.len(), 1);
        assert_eq!(replay.complete(&req).unwrap(), live);

        let other = CompletionRequest::new(Task::Qa, "Who?", "<p>x</p>").unwrap();
        assert!(matches!(replay.complete(&other), Err(ClientError::NoFixture(_))));
    }

    #[test]
    fn bad_fixture_line_reports_position() {
        let err = ScriptedClient::from_reader(&b"\n{\"prompt_hash\":1}\n"[..]).unwrap_err();
        assert!(err.to_string().contains("line 2"));
    }
}
