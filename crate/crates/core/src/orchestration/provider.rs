//! Text-completion providers.

use std::collections::{BTreeMap, VecDeque};
use std::fs;
use std::io;
use std::path::Path;
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use super::Role;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionRequest {
    /// Which pipeline role is asking. Providers may ignore it.
    pub role: Role,
    pub system_prompt: String,
    pub user_prompt: String,
    /// In `[0, 1]`.
    pub temperature: f32,
    pub max_output: u32,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Usage {
    pub prompt_tokens: Option<u32>,
    pub completion_tokens: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Completion {
    pub text: String,
    pub usage: Usage,
}

impl Completion {
    pub fn text(text: impl Into<String>) -> Self {
        Self {
            text: text.into(),
            usage: Usage::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProviderError {
    #[error("provider unreachable: {0}")]
    Unreachable(String),
    #[error("provider rejected the request with status {status}: {body}")]
    Rejected { status: u16, body: String },
    #[error("provider returned an unusable response: {0}")]
    BadResponse(String),
    #[error("scripted provider has no response left for the {0} role")]
    Exhausted(Role),
}

/// A single-shot text completion service.
pub trait LlmProvider: Send + Sync {
    fn complete(&self, request: &CompletionRequest) -> Result<Completion, ProviderError>;
}

impl<P: LlmProvider + ?Sized> LlmProvider for std::sync::Arc<P> {
    fn complete(&self, request: &CompletionRequest) -> Result<Completion, ProviderError> {
        (**self).complete(request)
    }
}

impl<P: LlmProvider + ?Sized> LlmProvider for &P {
    fn complete(&self, request: &CompletionRequest) -> Result<Completion, ProviderError> {
        (**self).complete(request)
    }
}

// ---------------------------------------------------------------------------
// Scripted provider
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ScriptedReply {
    Text(String),
    /// Simulates a transport failure with the given message.
    Fail(String),
}

#[derive(Debug, Default)]
struct Script {
    shared: VecDeque<ScriptedReply>,
    by_role: BTreeMap<Role, VecDeque<ScriptedReply>>,
    requests: Vec<CompletionRequest>,
}

/// Deterministic provider that replays canned responses in order.
///
/// Replies are taken from the queue of the requesting role when one was
/// configured, otherwise from the shared queue.
#[derive(Debug, Default)]
pub struct ScriptedProvider {
    script: Mutex<Script>,
}

impl ScriptedProvider {
    pub fn new<I, S>(replies: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self::from_replies(replies.into_iter().map(|s| ScriptedReply::Text(s.into())))
    }

    pub fn from_replies(replies: impl IntoIterator<Item = ScriptedReply>) -> Self {
        Self {
            script: Mutex::new(Script {
                shared: replies.into_iter().collect(),
                ..Script::default()
            }),
        }
    }

    pub fn with_role(self, role: Role, replies: impl IntoIterator<Item = ScriptedReply>) -> Self {
        self.script
            .lock()
            .expect("script lock")
            .by_role
            .insert(role, replies.into_iter().collect());
        self
    }

    /// Loads fixtures from a directory: one file per exchange, replayed in
    /// file-name order. Files ending in `.err` simulate a provider failure.
    /// If the directory has `planner/`, `designer/` or `suggester/`
    /// subdirectories, each becomes that role's queue; top-level files form
    /// the shared queue.
    pub fn from_dir(dir: &Path) -> io::Result<Self> {
        let mut provider = Self::from_replies(read_fixture_files(dir)?);
        for role in Role::ALL {
            let sub = dir.join(role.as_str());
            if sub.is_dir() {
                provider = provider.with_role(role, read_fixture_files(&sub)?);
            }
        }
        Ok(provider)
    }

    pub fn requests(&self) -> Vec<CompletionRequest> {
        self.script.lock().expect("script lock").requests.clone()
    }

    pub fn calls(&self) -> usize {
        self.script.lock().expect("script lock").requests.len()
    }

    pub fn remaining(&self) -> usize {
        let script = self.script.lock().expect("script lock");
        script.shared.len() + script.by_role.values().map(VecDeque::len).sum::<usize>()
    }
}

fn read_fixture_files(dir: &Path) -> io::Result<Vec<ScriptedReply>> {
    let mut paths = Vec::new();
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        if path.is_file() {
            paths.push(path);
        }
    }
    paths.sort();
    paths
        .into_iter()
        .map(|path| {
            let text = fs::read_to_string(&path)?;
            Ok(if path.extension().is_some_and(|e| e == "err") {
                ScriptedReply::Fail(text.trim().to_string())
            } else {
                ScriptedReply::Text(text)
            })
        })
        .collect()
}

impl LlmProvider for ScriptedProvider {
    fn complete(&self, request: &CompletionRequest) -> Result<Completion, ProviderError> {
        let mut script = self.script.lock().expect("script lock");
        script.requests.push(request.clone());
        let reply = match script.by_role.get_mut(&request.role) {
            Some(queue) => queue.pop_front(),
            None => script.shared.pop_front(),
        };
        match reply {
            Some(ScriptedReply::Text(text)) => Ok(Completion::text(text)),
            Some(ScriptedReply::Fail(message)) => Err(ProviderError::Unreachable(message)),
            None => Err(ProviderError::Exhausted(request.role)),
        }
    }
}

// ---------------------------------------------------------------------------
// HTTP chat-completion provider
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HttpProviderConfig {
    /// Full URL of a chat-completions endpoint.
    pub endpoint: String,
    pub api_key: Option<String>,
    pub model: String,
    pub timeout: Duration,
}

/// Talks to any service exposing the common chat-completions JSON shape:
/// `{"model", "messages": [{"role", "content"}], "temperature", "max_tokens"}`
/// answered by `{"choices": [{"message": {"content"}}], "usage": {...}}`.
pub struct HttpProvider {
    config: HttpProviderConfig,
    agent: ureq::Agent,
}

impl HttpProvider {
    pub fn new(config: HttpProviderConfig) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(config.timeout))
            .build()
            .into();
        Self { config, agent }
    }

    pub fn request_body(&self, request: &CompletionRequest) -> Value {
        json!({
            "model": self.config.model,
            "messages": [
                {"role": "system", "content": request.system_prompt},
                {"role": "user", "content": request.user_prompt},
            ],
            "temperature": request.temperature,
            "max_tokens": request.max_output,
        })
    }
}

pub fn parse_chat_response(value: &Value) -> Result<Completion, ProviderError> {
    let text = value
        .pointer("/choices/0/message/content")
        .and_then(Value::as_str)
        .ok_or_else(|| ProviderError::BadResponse("missing choices[0].message.content".into()))?;
    let usage = Usage {
        prompt_tokens: value
            .pointer("/usage/prompt_tokens")
            .and_then(Value::as_u64)
            .map(|n| n as u32),
        completion_tokens: value
            .pointer("/usage/completion_tokens")
            .and_then(Value::as_u64)
            .map(|n| n as u32),
    };
    Ok(Completion {
        text: text.to_string(),
        usage,
    })
}

impl LlmProvider for HttpProvider {
    fn complete(&self, request: &CompletionRequest) -> Result<Completion, ProviderError> {
        let mut call = self.agent.post(&self.config.endpoint);
        if let Some(key) = &self.config.api_key {
            call = call.header("Authorization", &format!("Bearer {key}"));
        }
        let mut response = call
            .config()
            .http_status_as_error(false)
            .build()
            .send_json(self.request_body(request))
            .map_err(|e| ProviderError::Unreachable(e.to_string()))?;
        let status = response.status().as_u16();
        if !(200..300).contains(&status) {
            let body = response.body_mut().read_to_string().unwrap_or_default();
            return Err(ProviderError::Rejected { status, body });
        }
        let value: Value = response
            .body_mut()
            .read_json()
            .map_err(|e| ProviderError::BadResponse(e.to_string()))?;
        parse_chat_response(&value)
    }
}
