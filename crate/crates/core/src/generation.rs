//! Pluggable text generation.
//!
//! Every component that needs free text (hypotheses, path scores, reflection
//! verdicts, final answers) goes through [`GenerationClient`]. Tests and the
//! bundled corpus replay recorded outputs with [`TranscriptClient`], keyed by
//! the 64-bit FNV-1a hash of the prompt.

use std::collections::{BTreeMap, VecDeque};
use std::path::Path;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embed::fnv1a64;

/// Environment variable selecting a remote generation service.
pub const GEN_ENDPOINT_ENV: &str = "CSM_GEN_ENDPOINT";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GenerationError {
    #[error("generation unavailable: {0}")]
    Unavailable(String),
}

pub trait GenerationClient: Send + Sync {
    fn generate(&self, prompt: &str) -> Result<String, GenerationError>;
}

impl<T: GenerationClient + ?Sized> GenerationClient for &T {
    fn generate(&self, prompt: &str) -> Result<String, GenerationError> {
        (**self).generate(prompt)
    }
}

impl<T: GenerationClient + ?Sized> GenerationClient for Box<T> {
    fn generate(&self, prompt: &str) -> Result<String, GenerationError> {
        (**self).generate(prompt)
    }
}

/// Transcript key of a prompt: lowercase hex of its FNV-1a hash.
pub fn prompt_hash(prompt: &str) -> String {
    format!("{:016x}", fnv1a64(prompt.as_bytes()))
}

/// Replays recorded outputs keyed by [`prompt_hash`]. Unknown prompts get
/// the default reply (empty unless configured), so the client never fails.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TranscriptClient {
    entries: BTreeMap<String, String>,
    default_reply: String,
}

impl TranscriptClient {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_entries(entries: BTreeMap<String, String>) -> Self {
        Self {
            entries,
            default_reply: String::new(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        Ok(Self::from_entries(serde_json::from_str(text)?))
    }

    /// Replies recorded for the bundled scenario corpus.
    pub fn bundled() -> Self {
        Self::from_json(include_str!("../data/transcript.json")).expect("bundled transcript is valid")
    }

    pub fn load(path: impl AsRef<Path>) -> std::io::Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text).map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))
    }

    pub fn to_json(&self) -> String {
        let mut out = serde_json::to_string_pretty(&self.entries).expect("string map serializes");
        out.push('\n');
        out
    }

    pub fn with_default(mut self, reply: impl Into<String>) -> Self {
        self.default_reply = reply.into();
        self
    }

    /// Records `reply` for `prompt`.
    pub fn record(&mut self, prompt: &str, reply: impl Into<String>) {
        self.entries.insert(prompt_hash(prompt), reply.into());
    }

    pub fn insert_hash(&mut self, hash: impl Into<String>, reply: impl Into<String>) {
        self.entries.insert(hash.into(), reply.into());
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

impl GenerationClient for TranscriptClient {
    fn generate(&self, prompt: &str) -> Result<String, GenerationError> {
        Ok(self
            .entries
            .get(&prompt_hash(prompt))
            .cloned()
            .unwrap_or_else(|| self.default_reply.clone()))
    }
}

/// Answers by the first rule whose marker occurs in the prompt.
///
/// Handy when the exact prompt text is not worth pinning in a test.
#[derive(Debug, Clone, Default)]
pub struct ScriptedClient {
    rules: Vec<(String, String)>,
    default_reply: String,
}

impl ScriptedClient {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn on(mut self, marker: impl Into<String>, reply: impl Into<String>) -> Self {
        self.rules.push((marker.into(), reply.into()));
        self
    }

    pub fn otherwise(mut self, reply: impl Into<String>) -> Self {
        self.default_reply = reply.into();
        self
    }
}

impl GenerationClient for ScriptedClient {
    fn generate(&self, prompt: &str) -> Result<String, GenerationError> {
        Ok(self
            .rules
            .iter()
            .find(|(marker, _)| prompt.contains(marker.as_str()))
            .map(|(_, reply)| reply.clone())
            .unwrap_or_else(|| self.default_reply.clone()))
    }
}

/// Replies in order; once exhausted it repeats the last reply (or the empty
/// string when constructed empty). Every prompt is kept for inspection.
#[derive(Debug, Default)]
pub struct SequenceClient {
    replies: Mutex<VecDeque<String>>,
    last: Mutex<String>,
    prompts: Mutex<Vec<String>>,
}

impl SequenceClient {
    pub fn new<I, S>(replies: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self {
            replies: Mutex::new(replies.into_iter().map(Into::into).collect()),
            ..Self::default()
        }
    }

    pub fn prompts(&self) -> Vec<String> {
        self.prompts.lock().unwrap().clone()
    }
}

impl GenerationClient for SequenceClient {
    fn generate(&self, prompt: &str) -> Result<String, GenerationError> {
        self.prompts.lock().unwrap().push(prompt.to_owned());
        let mut last = self.last.lock().unwrap();
        if let Some(next) = self.replies.lock().unwrap().pop_front() {
            *last = next;
        }
        Ok(last.clone())
    }
}

/// Always fails; models an unreachable service.
#[derive(Debug, Clone, Default)]
pub struct UnavailableClient;

impl GenerationClient for UnavailableClient {
    fn generate(&self, _prompt: &str) -> Result<String, GenerationError> {
        Err(GenerationError::Unavailable("no generation backend configured".into()))
    }
}

/// Wraps another client and records every `(prompt, reply)` exchange, e.g. to
/// author a transcript file.
pub struct RecordingClient<C> {
    inner: C,
    log: Mutex<Vec<(String, String)>>,
}

impl<C: GenerationClient> RecordingClient<C> {
    pub fn new(inner: C) -> Self {
        Self {
            inner,
            log: Mutex::new(Vec::new()),
        }
    }

    pub fn exchanges(&self) -> Vec<(String, String)> {
        self.log.lock().unwrap().clone()
    }

    pub fn to_transcript(&self) -> TranscriptClient {
        let mut t = TranscriptClient::new();
        for (prompt, reply) in self.exchanges() {
            t.record(&prompt, reply);
        }
        t
    }
}

impl<C: GenerationClient> GenerationClient for RecordingClient<C> {
    fn generate(&self, prompt: &str) -> Result<String, GenerationError> {
        let reply = self.inner.generate(prompt)?;
        self.log.lock().unwrap().push((prompt.to_owned(), reply.clone()));
        Ok(reply)
    }
}

/// Client for a remote service speaking `{"prompt": ...}` -> `{"text": ...}`.
#[derive(Debug, Clone)]
pub struct HttpGenerationClient {
    endpoint: String,
}

#[derive(Serialize)]
struct GenerateRequest<'a> {
    prompt: &'a str,
}

#[derive(Deserialize)]
struct GenerateResponse {
    text: String,
}

impl HttpGenerationClient {
    pub fn new(endpoint: impl Into<String>) -> Self {
        Self {
            endpoint: endpoint.into(),
        }
    }

    /// Reads `CSM_GEN_ENDPOINT`.
    pub fn from_env() -> Option<Self> {
        std::env::var(GEN_ENDPOINT_ENV)
            .ok()
            .filter(|url| !url.trim().is_empty())
            .map(Self::new)
    }
}

impl GenerationClient for HttpGenerationClient {
    fn generate(&self, prompt: &str) -> Result<String, GenerationError> {
        crate::http::post_json::<_, GenerateResponse>(&self.endpoint, &GenerateRequest { prompt })
            .map(|r| r.text)
            .map_err(GenerationError::Unavailable)
    }
}

/// Splits a generated list into items: one per non-empty line, with bullets
/// and "1." / "2)" numbering stripped.
pub(crate) fn parse_list(reply: &str) -> Vec<String> {
    reply
        .lines()
        .map(|line| {
            let line = line.trim();
            let line = line.trim_start_matches(['-', '*', '•']).trim_start();
            let digits = line.chars().take_while(char::is_ascii_digit).count();
            let rest = &line[digits..];
            let rest = if digits > 0 {
                rest.strip_prefix('.')
                    .or_else(|| rest.strip_prefix(')'))
                    .or_else(|| rest.strip_prefix(':'))
                    .unwrap_or(rest)
            } else {
                rest
            };
            rest.trim().to_owned()
        })
        .filter(|l| !l.is_empty())
        .collect()
}
