//! HTTP labeling client for OpenAI-compatible chat-completion endpoints, with bounded retries
//! and on-disk record/replay fixtures.

use std::path::{Path, PathBuf};
use std::time::Duration;

use coachmine_core::commentary::{ChatMessage, LabelingClient};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::config::{PipelineConfig, ENV_API_KEY};
use crate::error::{Error, Result};

/// Where request/response pairs are read from or written to.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum Fixtures {
    #[default]
    Off,
    /// Call the endpoint and save each exchange under the directory.
    Record(PathBuf),
    /// Answer only from saved exchanges; never touch the network.
    Replay(PathBuf),
}

#[derive(Debug, Clone)]
pub struct HttpLabeler {
    agent: ureq::Agent,
    endpoint: String,
    model: String,
    api_key: Option<String>,
    temperature: f64,
    max_retries: u32,
    backoff: Duration,
    fixtures: Fixtures,
}

impl HttpLabeler {
    pub fn new(endpoint: impl Into<String>, model: impl Into<String>) -> Self {
        Self {
            agent: agent(Duration::from_secs(60)),
            endpoint: endpoint.into(),
            model: model.into(),
            api_key: None,
            temperature: 0.0,
            max_retries: coachmine_core::defaults::LLM_MAX_RETRIES,
            backoff: Duration::from_millis(500),
            fixtures: Fixtures::Off,
        }
    }

    /// Endpoint and model from the environment or config; the API key only from the environment.
    pub fn from_config(config: &PipelineConfig, fixtures: Fixtures) -> Result<Self> {
        let endpoint = config.llm_endpoint();
        let model = config.llm_model();
        let (endpoint, model) = match (endpoint, model, &fixtures) {
            (Some(e), Some(m), _) => (e, m),
            (e, m, Fixtures::Replay(_)) => (e.unwrap_or_default(), m.unwrap_or_default()),
            _ => {
                return Err(Error::Config(
                    "set COACHMINE_LLM_ENDPOINT and COACHMINE_LLM_MODEL (or llm.endpoint / llm.model), or pass --stub"
                        .into(),
                ))
            }
        };
        let mut client = Self::new(endpoint, model)
            .with_retries(config.llm.max_retries, Duration::from_millis(config.llm.backoff_ms))
            .with_fixtures(fixtures);
        client.agent = agent(Duration::from_secs(config.llm.timeout_s));
        client.temperature = config.llm.temperature;
        client.api_key = std::env::var(ENV_API_KEY).ok().filter(|k| !k.is_empty());
        Ok(client)
    }

    pub fn with_api_key(mut self, key: impl Into<String>) -> Self {
        self.api_key = Some(key.into());
        self
    }

    pub fn with_retries(mut self, max_retries: u32, backoff: Duration) -> Self {
        self.max_retries = max_retries;
        self.backoff = backoff;
        self
    }

    pub fn with_fixtures(mut self, fixtures: Fixtures) -> Self {
        self.fixtures = fixtures;
        self
    }

    pub fn request_body(&self, messages: &[ChatMessage]) -> Value {
        json!({
            "model": self.model,
            "messages": messages,
            "temperature": self.temperature,
        })
    }

    fn send(&self, body: &Value) -> Result<Value> {
        let mut attempt = 0;
        loop {
            match self.send_once(body) {
                Ok(v) => return Ok(v),
                Err(Attempt::Fatal(e)) => return Err(e),
                Err(Attempt::Retryable(e)) if attempt >= self.max_retries => {
                    return Err(Error::Llm(format!("giving up after {} attempts: {e}", attempt + 1)))
                }
                Err(Attempt::Retryable(_)) => {
                    std::thread::sleep(self.backoff * 2u32.saturating_pow(attempt));
                    attempt += 1;
                }
            }
        }
    }

    fn send_once(&self, body: &Value) -> std::result::Result<Value, Attempt> {
        let mut request = self.agent.post(&self.endpoint).header("Content-Type", "application/json");
        if let Some(key) = &self.api_key {
            request = request.header("Authorization", &format!("Bearer {key}"));
        }
        let mut response = request
            .send(body.to_string())
            .map_err(|e| Attempt::Retryable(Error::Llm(e.to_string())))?;
        let status = response.status().as_u16();
        let text = response
            .body_mut()
            .read_to_string()
            .map_err(|e| Attempt::Retryable(Error::Llm(e.to_string())))?;
        match status {
            200..=299 => serde_json::from_str(&text)
                .map_err(|e| Attempt::Fatal(Error::Llm(format!("response is not JSON: {e}")))),
            429 | 500..=599 => Err(Attempt::Retryable(Error::Llm(format!("HTTP {status}: {text}")))),
            _ => Err(Attempt::Fatal(Error::Llm(format!("HTTP {status}: {text}")))),
        }
    }

    fn exchange(&self, body: &Value) -> Result<Value> {
        match &self.fixtures {
            Fixtures::Off => self.send(body),
            Fixtures::Replay(dir) => {
                let path = fixture_path(dir, body);
                let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
                let saved: Value = serde_json::from_str(&text).map_err(|e| Error::format(&path, None, e))?;
                Ok(saved["response"].clone())
            }
            Fixtures::Record(dir) => {
                let response = self.send(body)?;
                let path = fixture_path(dir, body);
                std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
                let saved = json!({ "request": body, "response": response });
                let text = serde_json::to_string_pretty(&saved).expect("json serializes");
                std::fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))?;
                Ok(response)
            }
        }
    }
}

enum Attempt {
    Retryable(Error),
    Fatal(Error),
}

fn agent(timeout: Duration) -> ureq::Agent {
    ureq::Agent::config_builder()
        .timeout_global(Some(timeout))
        .http_status_as_error(false)
        .build()
        .into()
}

/// Fixture file for a request: the first 16 hex digits of the SHA-256 of its JSON body.
pub fn fixture_path(dir: &Path, body: &Value) -> PathBuf {
    let digest = Sha256::digest(body.to_string().as_bytes());
    let name: String = digest[..8].iter().map(|b| format!("{b:02x}")).collect();
    dir.join(format!("{name}.json"))
}

/// Assistant text of the first choice.
pub fn response_text(response: &Value) -> Result<String> {
    response["choices"][0]["message"]["content"]
        .as_str()
        .map(str::to_owned)
        .ok_or_else(|| Error::Llm("response has no choices[0].message.content".into()))
}

impl LabelingClient for HttpLabeler {
    fn complete(&self, messages: &[ChatMessage]) -> coachmine_core::Result<String> {
        let body = self.request_body(messages);
        self.exchange(&body)
            .and_then(|r| response_text(&r))
            .map_err(|e| coachmine_core::Error::Service(e.to_string()))
    }
}
