//! Chat transport: conversation state, an OpenAI-compatible HTTP backend and a replay backend
//! keyed by request digest.

mod live;
mod replay;

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use self::live::{LiveBackend, LlmConfig};
pub use self::replay::{record_transcript, transcript_entries, ReplayBackend, TranscriptEntry};

#[derive(Debug, thiserror::Error)]
pub enum LlmError {
    #[error("conversation must end with a user message before sending")]
    NotAwaitingReply,
    #[error("roles must alternate: cannot add a {got} message after a {after} message")]
    RoleOrder { after: Role, got: Role },
    #[error("no replay fixture entry for request digest {digest}")]
    ReplayMiss { digest: String },
    #[error("HTTP {status}: {body}")]
    Http { status: u16, body: String },
    #[error("request failed after {attempts} attempts: {message}")]
    Transport { attempts: u32, message: String },
    #[error("malformed response: {0}")]
    Malformed(String),
    #[error("fixture {path}: {message}")]
    Fixture { path: String, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = LlmError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Role::System => "system",
            Role::User => "user",
            Role::Assistant => "assistant",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub role: Role,
    pub content: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChatSettings {
    pub temperature: f64,
    pub max_tokens: Option<u32>,
}

impl Default for ChatSettings {
    fn default() -> Self {
        Self { temperature: 0.0, max_tokens: None }
    }
}

/// Ordered chat history. Roles alternate user/assistant after an optional leading system message.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Conversation {
    pub model_id: String,
    pub settings: ChatSettings,
    messages: Vec<Message>,
    /// Transport notes such as retries; not part of the request.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub diagnostics: Vec<String>,
}

impl Conversation {
    pub fn new(model_id: impl Into<String>, settings: ChatSettings) -> Self {
        Self { model_id: model_id.into(), settings, messages: Vec::new(), diagnostics: Vec::new() }
    }

    /// Adds a system message; only valid on an empty conversation. Empty text is ignored.
    pub fn with_system(mut self, text: &str) -> Result<Self> {
        if !text.is_empty() {
            self.push(Role::System, text)?;
        }
        Ok(self)
    }

    pub fn push_user(&mut self, text: impl Into<String>) -> Result<()> {
        self.push(Role::User, text)
    }

    fn push(&mut self, role: Role, text: impl Into<String>) -> Result<()> {
        let expected = match self.messages.last().map(|m| m.role) {
            None => role != Role::Assistant,
            Some(Role::System) | Some(Role::Assistant) => role == Role::User,
            Some(Role::User) => role == Role::Assistant,
        };
        if !expected {
            let after = self.messages.last().map_or(Role::System, |m| m.role);
            return Err(LlmError::RoleOrder { after, got: role });
        }
        self.messages.push(Message { role, content: text.into() });
        Ok(())
    }

    pub fn messages(&self) -> &[Message] {
        &self.messages
    }

    pub fn is_empty(&self) -> bool {
        self.messages.is_empty()
    }

    pub fn last_assistant(&self) -> Option<&str> {
        self.messages.iter().rev().find(|m| m.role == Role::Assistant).map(|m| m.content.as_str())
    }

    /// Digest of the request that would be sent for the first `len` messages.
    pub fn digest_prefix(&self, len: usize) -> String {
        request_digest(&self.model_id, &self.messages[..len], self.settings.temperature)
    }

    pub fn request_digest(&self) -> String {
        self.digest_prefix(self.messages.len())
    }
}

/// SHA-256 over canonical JSON (sorted keys) of model, messages and temperature.
pub fn request_digest(model: &str, messages: &[Message], temperature: f64) -> String {
    let value = serde_json::json!({
        "model": model,
        "messages": messages,
        "temperature": temperature,
    });
    let canonical = serde_json::to_string(&value).expect("json value serialises");
    hex::encode(Sha256::digest(canonical.as_bytes()))
}

/// A reply source. Implementations must not mutate the conversation.
pub trait ChatBackend {
    /// Produces the assistant reply for `conversation`, pushing transport notes to `diagnostics`.
    fn complete(&self, conversation: &Conversation, diagnostics: &mut Vec<String>) -> Result<String>;
}

/// Requests a reply for the trailing user message and appends it.
pub fn send(conversation: &mut Conversation, backend: &dyn ChatBackend) -> Result<String> {
    if conversation.messages.last().map(|m| m.role) != Some(Role::User) {
        return Err(LlmError::NotAwaitingReply);
    }
    let mut notes = Vec::new();
    let reply = backend.complete(conversation, &mut notes);
    conversation.diagnostics.append(&mut notes);
    let reply = reply?;
    conversation.push(Role::Assistant, reply.clone())?;
    Ok(reply)
}

/// Loads a backend from a fixture path or live configuration.
pub fn backend_from(config: &LlmConfig, replay: Option<&Path>) -> Result<Box<dyn ChatBackend>> {
    Ok(match replay {
        Some(path) => Box::new(ReplayBackend::load(path)?),
        None => Box::new(LiveBackend::new(config.clone())?),
    })
}
