//! Prompt-template catalog and completion backend abstraction.
//!
//! Three backends: `live` makes real chat-completion calls, `replay` answers
//! from a fixture keyed by a digest of the rendered prompt, and `oracle`
//! answers from a rule table supplied by tests. Every completion is recorded
//! in a transcript, so call counts and full prompts are auditable.

mod backend;
mod parse;
mod templates;

pub use backend::{LiveConfig, ReplayStore};
pub use parse::{parse_choice, parse_operator_list, parse_subset, parse_yes_no, ChoiceOutcome, Verdict};
pub use templates::{lookup, AnswerShape, PromptTemplate, TEMPLATES};

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// A value bound to a prompt slot.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SlotValue {
    Text(String),
    /// Rendered as numbered entries in input order. Empty lists are rejected
    /// before a call is spent.
    Candidates(Vec<String>),
}

impl SlotValue {
    pub fn text(s: impl Into<String>) -> Self {
        SlotValue::Text(s.into())
    }

    pub fn candidates<I, S>(items: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        SlotValue::Candidates(items.into_iter().map(Into::into).collect())
    }
}

/// Ordered slot map for rendering.
pub type Slots = BTreeMap<&'static str, SlotValue>;

/// Which backend produced a response.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Live,
    Replay,
    Oracle,
}

impl fmt::Display for BackendKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            BackendKind::Live => "live",
            BackendKind::Replay => "replay",
            BackendKind::Oracle => "oracle",
        };
        f.write_str(s)
    }
}

/// One recorded completion.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub template_id: String,
    pub rendered_prompt: String,
    pub prompt_digest: String,
    pub response: String,
    pub backend: BackendKind,
}

/// Rule table mapping `(template_id, rendered_prompt)` to a canned
/// response.
type OracleRules = Box<dyn Fn(&str, &str) -> Option<String> + Send + Sync>;

enum Backend {
    Live(LiveConfig),
    Replay(ReplayStore),
    Oracle(OracleRules),
}

/// The completion gateway. Shareable across threads; transcript appends are
/// serialized internally.
pub struct Gateway {
    backend: Backend,
    transcript: Mutex<Vec<TranscriptEntry>>,
}

impl Gateway {
    pub fn live(config: LiveConfig) -> Self {
        Gateway { backend: Backend::Live(config), transcript: Mutex::new(Vec::new()) }
    }

    pub fn replay(store: ReplayStore) -> Self {
        Gateway { backend: Backend::Replay(store), transcript: Mutex::new(Vec::new()) }
    }

    /// Deterministic rule-table backend for tests. The rule receives
    /// `(template_id, rendered_prompt)` and returns the canned response.
    pub fn oracle<F>(rules: F) -> Self
    where
        F: Fn(&str, &str) -> Option<String> + Send + Sync + 'static,
    {
        Gateway { backend: Backend::Oracle(Box::new(rules)), transcript: Mutex::new(Vec::new()) }
    }

    pub fn backend_kind(&self) -> BackendKind {
        match self.backend {
            Backend::Live(_) => BackendKind::Live,
            Backend::Replay(_) => BackendKind::Replay,
            Backend::Oracle(_) => BackendKind::Oracle,
        }
    }

    /// Render a template with the given slots. Deterministic; candidate
    /// lists become numbered entries in input order.
    pub fn render_prompt(&self, template_id: &str, slots: &Slots) -> Result<String> {
        render(template_id, slots)
    }

    /// Render, complete, and record. Returns the raw response.
    pub fn ask(&self, template_id: &str, slots: &Slots) -> Result<String> {
        let prompt = render(template_id, slots)?;
        self.complete(template_id, &prompt)
    }

    /// Complete a rendered prompt against the configured backend, appending
    /// a transcript entry. Errors name the template.
    pub fn complete(&self, template_id: &str, prompt: &str) -> Result<String> {
        let digest = prompt_digest(prompt);
        let response = match &self.backend {
            Backend::Live(config) => config.complete(template_id, prompt)?,
            Backend::Replay(store) => store.get(&digest).ok_or_else(|| Error::ReplayMiss {
                template: template_id.to_string(),
                digest: digest.clone(),
            })?,
            Backend::Oracle(rules) => rules(template_id, prompt)
                .ok_or_else(|| Error::OracleMiss { template: template_id.to_string() })?,
        };
        let entry = TranscriptEntry {
            template_id: template_id.to_string(),
            rendered_prompt: prompt.to_string(),
            prompt_digest: digest,
            response: response.clone(),
            backend: self.backend_kind(),
        };
        self.transcript.lock().expect("transcript lock").push(entry);
        Ok(response)
    }

    /// Number of completions made so far.
    pub fn call_count(&self) -> usize {
        self.transcript.lock().expect("transcript lock").len()
    }

    pub fn transcript(&self) -> Vec<TranscriptEntry> {
        self.transcript.lock().expect("transcript lock").clone()
    }

    /// Serialize the transcript as newline-delimited JSON, the same format
    /// replay fixtures use.
    pub fn transcript_ndjson(&self) -> Result<String> {
        let mut out = String::new();
        for entry in self.transcript.lock().expect("transcript lock").iter() {
            let record = backend::FixtureRecord {
                digest: entry.prompt_digest.clone(),
                template_id: entry.template_id.clone(),
                prompt: entry.rendered_prompt.clone(),
                response: entry.response.clone(),
            };
            out.push_str(&serde_json::to_string(&record)?);
            out.push('\n');
        }
        Ok(out)
    }
}

/// Stable digest of a rendered prompt; replay fixtures are keyed by it so
/// any prompt drift surfaces as a replay miss rather than a stale answer.
pub fn prompt_digest(prompt: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(prompt.as_bytes());
    let out = hasher.finalize();
    let mut hex = String::with_capacity(64);
    for byte in out {
        hex.push_str(&format!("{byte:02x}"));
    }
    hex
}

fn render(template_id: &str, slots: &Slots) -> Result<String> {
    let template = templates::lookup(template_id)
        .ok_or_else(|| Error::UnknownTemplate(template_id.to_string()))?;
    let mut out = String::with_capacity(template.body.len());
    let mut rest = template.body;
    while let Some(start) = rest.find('{') {
        out.push_str(&rest[..start]);
        let after = &rest[start + 1..];
        let end = after.find('}').ok_or_else(|| {
            Error::GatewayConfig(format!("template {template_id:?} has an unterminated slot"))
        })?;
        let name = &after[..end];
        let value = slots.get(name).ok_or_else(|| Error::MissingSlot {
            template: template_id.to_string(),
            slot: name.to_string(),
        })?;
        match value {
            SlotValue::Text(text) => out.push_str(text),
            SlotValue::Candidates(items) => {
                if items.is_empty() {
                    return Err(Error::EmptyCandidates {
                        template: template_id.to_string(),
                        slot: name.to_string(),
                    });
                }
                out.push('\n');
                for (i, item) in items.iter().enumerate() {
                    out.push_str(&format!("{}. {}\n", i + 1, item));
                }
            }
        }
        rest = &after[end + 1..];
    }
    out.push_str(rest);
    Ok(out)
}
