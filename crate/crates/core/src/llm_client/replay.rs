use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ChatBackend, Conversation, LlmError, Result, Role};

/// One line of a replay fixture.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub digest: String,
    pub response: String,
}

/// Serves recorded responses by request digest. Makes no network calls.
#[derive(Debug, Clone, Default)]
pub struct ReplayBackend {
    responses: HashMap<String, String>,
}

impl ReplayBackend {
    pub fn from_entries(entries: impl IntoIterator<Item = TranscriptEntry>) -> Self {
        Self { responses: entries.into_iter().map(|e| (e.digest, e.response)).collect() }
    }

    /// Reads a JSON-lines fixture. Blank lines are skipped.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let mut entries = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let entry: TranscriptEntry = serde_json::from_str(line)
                .map_err(|e| LlmError::Fixture { path: path.display().to_string(), message: format!("line {}: {e}", i + 1) })?;
            entries.push(entry);
        }
        Ok(Self::from_entries(entries))
    }

    pub fn len(&self) -> usize {
        self.responses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.responses.is_empty()
    }
}

impl ChatBackend for ReplayBackend {
    fn complete(&self, conversation: &Conversation, _diagnostics: &mut Vec<String>) -> Result<String> {
        let digest = conversation.request_digest();
        self.responses.get(&digest).cloned().ok_or(LlmError::ReplayMiss { digest })
    }
}

/// One entry per assistant message, keyed by the digest of the request that produced it.
pub fn transcript_entries(conversation: &Conversation) -> Vec<TranscriptEntry> {
    conversation
        .messages()
        .iter()
        .enumerate()
        .filter(|(_, m)| m.role == Role::Assistant)
        .map(|(i, m)| TranscriptEntry { digest: conversation.digest_prefix(i), response: m.content.clone() })
        .collect()
}

/// Writes `conversation` as a replay fixture, replacing `path` atomically.
pub fn record_transcript(conversation: &Conversation, path: &Path) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    for entry in transcript_entries(conversation) {
        let line = serde_json::to_string(&entry).expect("entry serialises");
        writeln!(tmp, "{line}")?;
    }
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}
