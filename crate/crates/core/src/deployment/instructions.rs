//! The execution graph and the parsers that build it, either from a human
//! instructions file or from prompt answers.
//!
//! Instructions file format, one step per line:
//!
//! ```text
//! 1. Create the roles and role inheritance. [tables: role hierarchy]
//! 2. Create views and grant privileges. [tables: 1, 3] [after: 1]
//! ```
//!
//! Table references are 1-based table indices or requirement labels
//! (case-insensitive); `after` lists prerequisite step numbers.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One instruction step: the tables it consumes and the steps whose outputs
/// it needs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Step {
    /// 1-based step number as written.
    pub index: usize,
    pub text: String,
    /// 0-based policy-table indices.
    pub tables: Vec<usize>,
    /// 1-based prerequisite step numbers.
    pub after: Vec<usize>,
}

/// Acyclic step graph; edges run prerequisite -> dependent.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecutionGraph {
    pub steps: Vec<Step>,
}

impl ExecutionGraph {
    /// Steps in topological order, stable by step number.
    pub fn topological(&self) -> Result<Vec<&Step>> {
        let mut done: BTreeSet<usize> = BTreeSet::new();
        let mut out: Vec<&Step> = Vec::new();
        while out.len() < self.steps.len() {
            let before = out.len();
            for step in &self.steps {
                if done.contains(&step.index) {
                    continue;
                }
                if step.after.iter().all(|dep| done.contains(dep)) {
                    done.insert(step.index);
                    out.push(step);
                }
            }
            if out.len() == before {
                let stuck: Vec<String> = self
                    .steps
                    .iter()
                    .filter(|s| !done.contains(&s.index))
                    .map(|s| s.index.to_string())
                    .collect();
                return Err(Error::GraphCycle(stuck.join(", ")));
            }
        }
        Ok(out)
    }

    /// Acyclicity plus table-index bounds.
    pub fn validate(&self, table_count: usize) -> Result<()> {
        for step in &self.steps {
            for &table in &step.tables {
                if table >= table_count {
                    return Err(Error::Instructions {
                        line: step.index,
                        message: format!(
                            "step {} references table {} but the bundle has {}",
                            step.index,
                            table + 1,
                            table_count
                        ),
                    });
                }
            }
            for &dep in &step.after {
                if !self.steps.iter().any(|s| s.index == dep) {
                    return Err(Error::Instructions {
                        line: step.index,
                        message: format!("step {} waits on unknown step {dep}", step.index),
                    });
                }
            }
        }
        self.topological().map(|_| ())
    }
}

/// Parse a human instructions file into the graph shape.
pub fn parse_instructions(text: &str, labels: &[String]) -> Result<ExecutionGraph> {
    let mut steps = Vec::new();
    for (line_no, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (index, rest) = parse_step_number(line).ok_or_else(|| Error::Instructions {
            line: line_no + 1,
            message: format!("expected a numbered step, found {line:?}"),
        })?;
        let mut step_text = rest.to_string();
        let mut tables = Vec::new();
        let mut after = Vec::new();
        while let Some(open) = step_text.rfind('[') {
            let Some(close) = step_text[open..].find(']') else { break };
            let annotation = step_text[open + 1..open + close].to_string();
            step_text.truncate(open);
            if let Some(refs) = annotation.strip_prefix("tables:") {
                tables = parse_table_refs(refs, labels, line_no + 1)?;
            } else if let Some(refs) = annotation.strip_prefix("after:") {
                after = parse_numbers(refs);
            } else {
                return Err(Error::Instructions {
                    line: line_no + 1,
                    message: format!("unknown annotation [{annotation}]"),
                });
            }
        }
        steps.push(Step { index, text: step_text.trim().to_string(), tables, after });
    }
    if steps.is_empty() {
        return Err(Error::Instructions { line: 0, message: "no steps found".into() });
    }
    Ok(ExecutionGraph { steps })
}

/// Build the graph from the instructions answer and the two follow-up
/// answers (which tables feed each step, and which prior steps feed each
/// step). Follow-ups are read line-wise: `Step N: ...`.
pub fn from_llm_answers(
    instructions: &str,
    tables_answer: &str,
    deps_answer: &str,
    labels: &[String],
) -> Result<ExecutionGraph> {
    let mut steps: Vec<Step> = Vec::new();
    for line in instructions.lines() {
        let line = line.trim();
        if let Some((index, rest)) = parse_step_number(line) {
            steps.push(Step { index, text: rest.to_string(), tables: vec![], after: vec![] });
        }
    }
    if steps.is_empty() {
        return Err(Error::Instructions {
            line: 0,
            message: "instructions answer contains no numbered steps".into(),
        });
    }
    for line in tables_answer.lines() {
        if let Some((step_no, rest)) = parse_step_line(line) {
            if let Some(step) = steps.iter_mut().find(|s| s.index == step_no) {
                step.tables = parse_table_refs(rest, labels, 0)?;
            }
        }
    }
    for line in deps_answer.lines() {
        if let Some((step_no, rest)) = parse_step_line(line) {
            if let Some(step) = steps.iter_mut().find(|s| s.index == step_no) {
                step.after = parse_numbers(rest).into_iter().filter(|&d| d != step_no).collect();
            }
        }
    }
    Ok(ExecutionGraph { steps })
}

fn parse_step_number(line: &str) -> Option<(usize, &str)> {
    let digits: String = line.chars().take_while(|c| c.is_ascii_digit()).collect();
    if digits.is_empty() {
        return None;
    }
    let rest = line[digits.len()..].trim_start_matches(['.', ')', ':']).trim();
    Some((digits.parse().ok()?, rest))
}

/// `Step N: tail` (case-insensitive) -> (N, tail).
fn parse_step_line(line: &str) -> Option<(usize, &str)> {
    let trimmed = line.trim();
    let lower = trimmed.to_lowercase();
    let rest = lower.strip_prefix("step")?;
    let digits: String = rest.trim_start().chars().take_while(|c| c.is_ascii_digit()).collect();
    if digits.is_empty() {
        return None;
    }
    let step_no: usize = digits.parse().ok()?;
    let tail_pos = trimmed.to_lowercase().find(&digits)? + digits.len();
    let tail = trimmed[tail_pos..].trim_start_matches([':', '.', '-']).trim();
    Some((step_no, tail))
}

fn parse_table_refs(refs: &str, labels: &[String], line: usize) -> Result<Vec<usize>> {
    let mut out = Vec::new();
    for piece in refs.split(',') {
        let piece = piece.trim().trim_end_matches('.');
        if piece.is_empty() {
            continue;
        }
        if let Ok(n) = piece.parse::<usize>() {
            if n == 0 {
                return Err(Error::Instructions { line, message: "table indices are 1-based".into() });
            }
            out.push(n - 1);
            continue;
        }
        match labels.iter().position(|l| l.eq_ignore_ascii_case(piece)) {
            Some(i) => out.push(i),
            None => {
                return Err(Error::Instructions {
                    line,
                    message: format!("unknown policy table {piece:?}"),
                })
            }
        }
    }
    Ok(out)
}

fn parse_numbers(text: &str) -> Vec<usize> {
    let mut out = Vec::new();
    let mut digits = String::new();
    for c in text.chars().chain(std::iter::once(' ')) {
        if c.is_ascii_digit() {
            digits.push(c);
        } else if !digits.is_empty() {
            if let Ok(n) = digits.parse() {
                out.push(n);
            }
            digits.clear();
        }
    }
    out
}
