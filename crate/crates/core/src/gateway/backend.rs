//! Replay fixtures and the live chat-completion transport.

use std::collections::HashMap;
use std::path::Path;
use std::sync::{Condvar, Mutex};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One replay fixture record, newline-delimited JSON on disk.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FixtureRecord {
    pub digest: String,
    pub template_id: String,
    pub prompt: String,
    pub response: String,
}

/// Fixture lookup by prompt digest. Read-only after load.
#[derive(Debug, Default)]
pub struct ReplayStore {
    by_digest: HashMap<String, String>,
}

impl ReplayStore {
    pub fn from_ndjson(text: &str) -> Result<Self> {
        let mut by_digest = HashMap::new();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let record: FixtureRecord = serde_json::from_str(line)?;
            by_digest.insert(record.digest, record.response);
        }
        Ok(ReplayStore { by_digest })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_ndjson(&std::fs::read_to_string(path)?)
    }

    pub fn get(&self, digest: &str) -> Option<String> {
        self.by_digest.get(digest).cloned()
    }

    pub fn len(&self) -> usize {
        self.by_digest.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_digest.is_empty()
    }
}

/// Live chat-completion backend configuration. The endpoint speaks the
/// OpenAI-style `/chat/completions` JSON shape.
pub struct LiveConfig {
    pub base_url: String,
    pub model: String,
    pub api_key: String,
    /// Decoding temperature; defaults to 0 for stability.
    pub temperature: f64,
    pub max_retries: u32,
    /// Upper bound on concurrent in-flight calls.
    pub parallelism: usize,
    in_flight: Mutex<usize>,
    available: Condvar,
}

impl LiveConfig {
    pub fn new(base_url: impl Into<String>, model: impl Into<String>, api_key: impl Into<String>) -> Self {
        LiveConfig {
            base_url: base_url.into(),
            model: model.into(),
            api_key: api_key.into(),
            temperature: 0.0,
            max_retries: 2,
            parallelism: 4,
            in_flight: Mutex::new(0),
            available: Condvar::new(),
        }
    }

    pub(crate) fn complete(&self, template_id: &str, prompt: &str) -> Result<String> {
        let _permit = self.acquire();
        let url = format!("{}/chat/completions", self.base_url.trim_end_matches('/'));
        let body = serde_json::json!({
            "model": self.model,
            "temperature": self.temperature,
            "messages": [{"role": "user", "content": prompt}],
        });
        let mut last_error = String::new();
        for _attempt in 0..=self.max_retries {
            let result = ureq::post(&url)
                .set("Authorization", &format!("Bearer {}", self.api_key))
                .set("Content-Type", "application/json")
                .send_json(body.clone());
            match result {
                Ok(response) => {
                    let json: serde_json::Value = response.into_json().map_err(Error::Io)?;
                    if let Some(content) =
                        json["choices"][0]["message"]["content"].as_str()
                    {
                        return Ok(content.to_string());
                    }
                    last_error = format!("malformed completion payload: {json}");
                }
                Err(e) => last_error = e.to_string(),
            }
        }
        Err(Error::Transport {
            template: template_id.to_string(),
            attempts: self.max_retries + 1,
            message: last_error,
        })
    }

    fn acquire(&self) -> Permit<'_> {
        let mut count = self.in_flight.lock().expect("permit lock");
        while *count >= self.parallelism.max(1) {
            count = self.available.wait(count).expect("permit wait");
        }
        *count += 1;
        Permit { config: self }
    }
}

struct Permit<'a> {
    config: &'a LiveConfig,
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        let mut count = self.config.in_flight.lock().expect("permit lock");
        *count -= 1;
        self.config.available.notify_one();
    }
}
