//! Generic chat-completion adapter.
//!
//! Posts `{"model", "messages", ...sampling}` to the configured URL with a
//! bearer credential and reads the assistant text from the usual response
//! shapes (`choices[0].message.content`, `message.content`, `content[0].text`).

use std::sync::{Arc, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use haunted_core::transcript::{AgentInfo, ChatMessage};
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::agent::{Agent, AgentError};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Sampling {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub temperature: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub top_p: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub top_k: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentConfig {
    pub endpoint_url: String,
    pub model_id: String,
    /// Name of the environment variable holding the secret.
    pub credential: String,
    /// Provider defaults when empty.
    #[serde(default)]
    pub sampling: Sampling,
    pub timeout: Duration,
    pub max_parse_retries: u32,
    /// Minimum interval between requests, shared by every agent cloned from
    /// the same [`ChatAgent`].
    pub request_pacing: Duration,
    /// Extra attempts after a 429, 5xx or network failure.
    pub max_retries: u32,
    /// First backoff delay; doubles per attempt.
    pub backoff: Duration,
}

pub const DEFAULT_CREDENTIAL_VAR: &str = "HAUNTED_API_KEY";

impl AgentConfig {
    pub fn new(endpoint_url: impl Into<String>, model_id: impl Into<String>) -> AgentConfig {
        AgentConfig {
            endpoint_url: endpoint_url.into(),
            model_id: model_id.into(),
            credential: DEFAULT_CREDENTIAL_VAR.to_owned(),
            sampling: Sampling::default(),
            timeout: Duration::from_secs(60),
            max_parse_retries: 2,
            request_pacing: Duration::from_secs(1),
            max_retries: 3,
            backoff: Duration::from_secs(1),
        }
    }
}

#[derive(Debug, Error)]
pub enum ChatError {
    #[error("credential variable {0} is not set")]
    MissingCredential(String),
}

#[derive(Debug, Default)]
struct Pacer {
    last: Mutex<Option<Instant>>,
}

impl Pacer {
    fn wait(&self, interval: Duration) {
        let mut last = self.last.lock().unwrap_or_else(|e| e.into_inner());
        if let Some(prev) = *last {
            let ready = prev + interval;
            let now = Instant::now();
            if ready > now {
                thread::sleep(ready - now);
            }
        }
        *last = Some(Instant::now());
    }
}

/// An [`Agent`] backed by a chat-completion endpoint. Cloning shares the pacer.
#[derive(Debug, Clone)]
pub struct ChatAgent {
    config: AgentConfig,
    secret: String,
    http: ureq::Agent,
    pacer: Arc<Pacer>,
}

/// Builds a [`ChatAgent`], reading the secret from `config.credential`.
pub fn chat_agent(config: AgentConfig) -> Result<ChatAgent, ChatError> {
    let secret = std::env::var(&config.credential)
        .ok()
        .filter(|s| !s.is_empty())
        .ok_or_else(|| ChatError::MissingCredential(config.credential.clone()))?;
    Ok(ChatAgent::with_secret(config, secret))
}

enum Attempt {
    Done(String),
    Retry(String),
    Fail(String),
}

impl ChatAgent {
    pub fn with_secret(config: AgentConfig, secret: impl Into<String>) -> ChatAgent {
        let http: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(config.timeout))
            .http_status_as_error(false)
            .build()
            .into();
        ChatAgent {
            config,
            secret: secret.into(),
            http,
            pacer: Arc::new(Pacer::default()),
        }
    }

    pub fn config(&self) -> &AgentConfig {
        &self.config
    }

    pub fn request_body(&self, history: &[ChatMessage]) -> Value {
        let mut body = Map::new();
        body.insert("model".into(), json!(self.config.model_id));
        body.insert("messages".into(), json!(history));
        if let Value::Object(sampling) = json!(self.config.sampling) {
            body.extend(sampling);
        }
        Value::Object(body)
    }

    fn attempt(&self, body: &Value) -> Attempt {
        self.pacer.wait(self.config.request_pacing);
        let response = self
            .http
            .post(&self.config.endpoint_url)
            .header("Authorization", &format!("Bearer {}", self.secret))
            .send_json(body);
        let mut response = match response {
            Ok(r) => r,
            Err(e) => return Attempt::Retry(e.to_string()),
        };
        let status = response.status().as_u16();
        if status == 429 || status >= 500 {
            return Attempt::Retry(format!("HTTP {status}"));
        }
        if !(200..300).contains(&status) {
            return Attempt::Fail(format!("HTTP {status}"));
        }
        match response.body_mut().read_json::<Value>() {
            Ok(v) => match extract_reply(&v) {
                Some(text) => Attempt::Done(text),
                None => Attempt::Fail("response has no assistant text".into()),
            },
            Err(e) => Attempt::Fail(format!("bad response body: {e}")),
        }
    }
}

/// Pulls the assistant text out of a chat-completion response.
pub fn extract_reply(v: &Value) -> Option<String> {
    let candidates = [
        v.pointer("/choices/0/message/content"),
        v.pointer("/message/content"),
        v.pointer("/content/0/text"),
    ];
    candidates
        .into_iter()
        .flatten()
        .find_map(|c| c.as_str())
        .map(str::to_owned)
}

impl Agent for ChatAgent {
    fn reply(&mut self, history: &[ChatMessage]) -> Result<String, AgentError> {
        let body = self.request_body(history);
        let mut delay = self.config.backoff;
        let mut attempt = 0;
        loop {
            match self.attempt(&body) {
                Attempt::Done(text) => return Ok(text),
                Attempt::Fail(e) => return Err(AgentError::Transport(e)),
                Attempt::Retry(e) if attempt >= self.config.max_retries => {
                    return Err(AgentError::Transport(format!(
                        "{e} after {} attempts",
                        attempt + 1
                    )))
                }
                Attempt::Retry(e) => {
                    log::warn!("chat request failed ({e}), retrying in {delay:?}");
                    thread::sleep(delay);
                    delay = delay.saturating_mul(2);
                    attempt += 1;
                }
            }
        }
    }

    fn info(&self) -> AgentInfo {
        AgentInfo::model(self.config.model_id.clone())
    }
}
