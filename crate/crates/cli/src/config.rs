//! Run configuration: a sectioned key-value file plus command-line flags.
//!
//! ```text
//! [gateway]
//! backend = replay
//! model = my-model
//! base_url = https://example.invalid/v1
//! api_key_env = NLAC_API_KEY
//! parallelism = 4
//!
//! [pipeline]
//! dialect = postgres
//! feedback_rounds = 2
//! ```
//!
//! Unknown sections or keys are rejected before any pipeline starts.

use std::path::Path;

use nlac_core::{Error, Result};

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub backend: String,
    pub model: String,
    pub base_url: String,
    pub api_key_env: String,
    pub parallelism: usize,
    pub dialect: String,
    pub feedback_rounds: u32,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            backend: "replay".into(),
            model: String::new(),
            base_url: String::new(),
            api_key_env: "NLAC_API_KEY".into(),
            parallelism: 4,
            dialect: "postgres".into(),
            feedback_rounds: 2,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut config = RunConfig::default();
        let mut section = String::new();
        for (line_no, raw_line) in text.lines().enumerate() {
            let line = raw_line.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
                section = name.trim().to_string();
                if section != "gateway" && section != "pipeline" {
                    return Err(Error::Config(format!(
                        "line {}: unknown section [{section}]",
                        line_no + 1
                    )));
                }
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::Config(format!("line {}: expected key = value", line_no + 1)));
            };
            let key = key.trim();
            let value = value.trim();
            let parse_usize = |v: &str| {
                v.parse::<usize>()
                    .map_err(|_| Error::Config(format!("line {}: {key} must be a number", line_no + 1)))
            };
            match (section.as_str(), key) {
                ("gateway", "backend") => config.backend = value.into(),
                ("gateway", "model") => config.model = value.into(),
                ("gateway", "base_url") => config.base_url = value.into(),
                ("gateway", "api_key_env") => config.api_key_env = value.into(),
                ("gateway", "parallelism") => config.parallelism = parse_usize(value)?,
                ("pipeline", "dialect") => config.dialect = value.into(),
                ("pipeline", "feedback_rounds") => {
                    config.feedback_rounds = parse_usize(value)? as u32
                }
                _ => {
                    return Err(Error::Config(format!(
                        "line {}: unknown key {key:?} in section [{section}]",
                        line_no + 1
                    )))
                }
            }
        }
        Ok(config)
    }
}
