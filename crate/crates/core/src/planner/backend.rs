//! Language backends produce plan text for a task. The planner never trusts it:
//! whatever comes back must survive the strict parser and symbol binding.

use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use super::prompt::PromptContext;
use super::world::WorldModel;

pub const API_KEY_ENV: &str = "HRC_LLM_API_KEY";
pub const DEFAULT_RETRIES: u32 = 2;

pub struct PlanRequest<'a> {
    pub task: &'a str,
    pub context: &'a PromptContext,
    pub world: &'a WorldModel,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BackendError {
    #[error("no rule covers `{0}`")]
    Unsupported(String),
    #[error("transport failed after {attempts} attempts: {message}")]
    Transport { attempts: u32, message: String },
    #[error("malformed completion response: {0}")]
    BadResponse(String),
}

pub trait LanguageBackend: Send + Sync {
    fn name(&self) -> &str;
    /// Returns plan text in the `subtask:` / `mf:` line format.
    fn complete(&self, request: &PlanRequest<'_>) -> Result<String, BackendError>;
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RemoteConfig {
    /// Full chat-completions URL.
    pub endpoint: String,
    pub model: String,
    #[serde(default = "default_key_env")]
    pub api_key_env: String,
    #[serde(default = "default_retries")]
    pub max_retries: u32,
    #[serde(default = "default_timeout_ms")]
    pub timeout_ms: u64,
}

fn default_key_env() -> String {
    API_KEY_ENV.to_string()
}

fn default_retries() -> u32 {
    DEFAULT_RETRIES
}

fn default_timeout_ms() -> u64 {
    60_000
}

impl RemoteConfig {
    pub fn new(endpoint: impl Into<String>, model: impl Into<String>) -> Self {
        RemoteConfig {
            endpoint: endpoint.into(),
            model: model.into(),
            api_key_env: default_key_env(),
            max_retries: DEFAULT_RETRIES,
            timeout_ms: default_timeout_ms(),
        }
    }
}

/// Chat-completion endpoint queried at temperature 0.
pub struct RemoteBackend {
    config: RemoteConfig,
    agent: ureq::Agent,
}

impl RemoteBackend {
    pub fn new(config: RemoteConfig) -> Self {
        let agent = ureq::Agent::config_builder().timeout_global(Some(Duration::from_millis(config.timeout_ms))).build().into();
        RemoteBackend { config, agent }
    }

    pub fn config(&self) -> &RemoteConfig {
        &self.config
    }

    pub fn request_body(&self, request: &PlanRequest<'_>) -> Value {
        json!({
            "model": self.config.model,
            "temperature": 0,
            "messages": [
                {"role": "system", "content": request.context.system_message()},
                {"role": "user", "content": request.context.user_message(request.task)},
            ],
        })
    }

    fn attempt(&self, body: &Value) -> Result<Value, (bool, String)> {
        let mut req = self.agent.post(&self.config.endpoint);
        if let Ok(key) = std::env::var(&self.config.api_key_env) {
            req = req.header("Authorization", format!("Bearer {key}"));
        }
        match req.send_json(body) {
            Ok(mut resp) => resp.body_mut().read_json::<Value>().map_err(|e| (false, e.to_string())),
            Err(ureq::Error::StatusCode(code)) => Err((code >= 500 || code == 429, format!("HTTP {code}"))),
            Err(e) => Err((true, e.to_string())),
        }
    }
}

impl LanguageBackend for RemoteBackend {
    fn name(&self) -> &str {
        "remote"
    }

    fn complete(&self, request: &PlanRequest<'_>) -> Result<String, BackendError> {
        let body = self.request_body(request);
        let mut attempts = 0;
        loop {
            attempts += 1;
            match self.attempt(&body) {
                Ok(v) => {
                    return v["choices"][0]["message"]["content"]
                        .as_str()
                        .map(str::to_string)
                        .ok_or_else(|| BackendError::BadResponse(v.to_string()));
                }
                Err((retryable, message)) => {
                    if !retryable || attempts > self.config.max_retries {
                        return Err(BackendError::Transport { attempts, message });
                    }
                }
            }
        }
    }
}
