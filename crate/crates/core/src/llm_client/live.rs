use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{ChatBackend, ChatSettings, Conversation, LlmError, Result};

fn default_base_url() -> String {
    "https://api.openai.com/v1".to_owned()
}

fn default_model() -> String {
    "gpt-4".to_owned()
}

fn default_timeout() -> u64 {
    120
}

fn default_retries() -> u32 {
    2
}

fn default_backoff() -> u64 {
    500
}

fn default_key_env() -> String {
    "OPENAI_API_KEY".to_owned()
}

/// Endpoint settings. The credential is referenced by environment variable name only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LlmConfig {
    #[serde(default = "default_base_url")]
    pub base_url: String,
    #[serde(default = "default_model")]
    pub model: String,
    #[serde(default)]
    pub temperature: f64,
    #[serde(default)]
    pub max_tokens: Option<u32>,
    #[serde(default = "default_timeout")]
    pub timeout_s: u64,
    /// Retries after the first attempt.
    #[serde(default = "default_retries")]
    pub max_retries: u32,
    /// First backoff delay; doubles on each retry.
    #[serde(default = "default_backoff")]
    pub backoff_ms: u64,
    #[serde(default = "default_key_env")]
    pub api_key_env: String,
}

impl Default for LlmConfig {
    fn default() -> Self {
        Self {
            base_url: default_base_url(),
            model: default_model(),
            temperature: 0.0,
            max_tokens: None,
            timeout_s: default_timeout(),
            max_retries: default_retries(),
            backoff_ms: default_backoff(),
            api_key_env: default_key_env(),
        }
    }
}

impl LlmConfig {
    pub fn settings(&self) -> ChatSettings {
        ChatSettings { temperature: self.temperature, max_tokens: self.max_tokens }
    }

    pub fn conversation(&self) -> Conversation {
        Conversation::new(self.model.clone(), self.settings())
    }
}

/// OpenAI-compatible `POST {base_url}/chat/completions`.
pub struct LiveBackend {
    config: LlmConfig,
    client: reqwest::blocking::Client,
}

#[derive(Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    messages: &'a [super::Message],
    temperature: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    max_tokens: Option<u32>,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: ReplyMessage,
}

#[derive(Deserialize)]
struct ReplyMessage {
    content: Option<String>,
}

enum Failure {
    Transient(String),
    Fatal(LlmError),
}

impl LiveBackend {
    pub fn new(config: LlmConfig) -> Result<Self> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(config.timeout_s))
            .build()
            .map_err(|e| LlmError::Transport { attempts: 0, message: e.to_string() })?;
        Ok(Self { config, client })
    }

    pub fn config(&self) -> &LlmConfig {
        &self.config
    }

    fn endpoint(&self) -> String {
        format!("{}/chat/completions", self.config.base_url.trim_end_matches('/'))
    }

    fn attempt(&self, body: &ChatRequest<'_>) -> std::result::Result<String, Failure> {
        let mut request = self.client.post(self.endpoint()).json(body);
        match std::env::var(&self.config.api_key_env) {
            Ok(key) if !key.is_empty() => request = request.bearer_auth(key),
            _ => log::debug!("{} is not set; sending without credentials", self.config.api_key_env),
        }
        let response = request.send().map_err(|e| Failure::Transient(e.to_string()))?;
        let status = response.status();
        let text = response.text().map_err(|e| Failure::Transient(e.to_string()))?;
        if status.as_u16() == 429 || status.is_server_error() {
            return Err(Failure::Transient(format!("HTTP {}: {}", status.as_u16(), text)));
        }
        if !status.is_success() {
            return Err(Failure::Fatal(LlmError::Http { status: status.as_u16(), body: text }));
        }
        let parsed: ChatResponse = serde_json::from_str(&text).map_err(|e| Failure::Fatal(LlmError::Malformed(e.to_string())))?;
        parsed
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .ok_or_else(|| Failure::Fatal(LlmError::Malformed("no message content in choices".to_owned())))
    }
}

impl ChatBackend for LiveBackend {
    fn complete(&self, conversation: &Conversation, diagnostics: &mut Vec<String>) -> Result<String> {
        let body = ChatRequest {
            model: &conversation.model_id,
            messages: conversation.messages(),
            temperature: conversation.settings.temperature,
            max_tokens: conversation.settings.max_tokens,
        };
        let attempts = self.config.max_retries + 1;
        let mut delay = Duration::from_millis(self.config.backoff_ms);
        for attempt in 1..=attempts {
            match self.attempt(&body) {
                Ok(text) => return Ok(text),
                Err(Failure::Fatal(e)) => return Err(e),
                Err(Failure::Transient(message)) if attempt < attempts => {
                    let note = format!("attempt {attempt} failed ({message}); retrying in {} ms", delay.as_millis());
                    log::warn!("{note}");
                    diagnostics.push(note);
                    thread::sleep(delay);
                    delay *= 2;
                }
                Err(Failure::Transient(message)) => return Err(LlmError::Transport { attempts, message }),
            }
        }
        unreachable!("loop returns on the last attempt")
    }
}
