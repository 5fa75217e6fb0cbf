//! Robust parsing of constrained LLM answers.
//!
//! Parsers never fabricate values: anything that fails to match yields
//! no-match (or, for verdicts, the conservative reading), and the raw
//! response is kept for the audit trail.

use crate::acm::{Operator, PrivilegeSet};

/// Outcome of matching a response against a candidate list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChoiceOutcome {
    /// Index into the candidate list, if any candidate matched.
    pub choice: Option<usize>,
    /// Whatever the model said beyond the matched candidate.
    pub explanation: String,
}

/// Match a response against candidates: first the candidate whose normalized
/// text is a prefix of the normalized response (longest wins), then exact
/// containment of exactly one candidate, else no-match.
pub fn parse_choice(response: &str, candidates: &[&str]) -> ChoiceOutcome {
    let norm_response = normalize(response);
    let mut best: Option<(usize, usize)> = None; // (candidate index, normalized len)
    for (i, cand) in candidates.iter().enumerate() {
        let norm_cand = normalize(cand);
        if norm_cand.is_empty() {
            continue;
        }
        if norm_response.starts_with(&norm_cand) {
            let len = norm_cand.len();
            if best.is_none_or(|(_, l)| len > l) {
                best = Some((i, len));
            }
        }
    }
    if let Some((i, _)) = best {
        return ChoiceOutcome { choice: Some(i), explanation: remainder(response, candidates[i]) };
    }
    let contained: Vec<usize> = candidates
        .iter()
        .enumerate()
        .filter(|(_, c)| contains_bounded(&norm_response, &normalize(c)))
        .map(|(i, _)| i)
        .collect();
    if contained.len() == 1 {
        let i = contained[0];
        return ChoiceOutcome { choice: Some(i), explanation: remainder(response, candidates[i]) };
    }
    ChoiceOutcome { choice: None, explanation: response.trim().to_string() }
}

/// Candidate-subset answers: a candidate is selected iff its text appears in
/// the response (normalized containment). Unmatched prose is ignored.
/// Returned indices preserve candidate order and never repeat.
pub fn parse_subset(response: &str, candidates: &[&str]) -> Vec<usize> {
    let norm_response = normalize(response);
    candidates
        .iter()
        .enumerate()
        .filter(|(_, c)| contains_bounded(&norm_response, &normalize(c)))
        .map(|(i, _)| i)
        .collect()
}

/// Containment on word boundaries, so "view0" does not match inside
/// "view01".
fn contains_bounded(haystack: &str, needle: &str) -> bool {
    if needle.is_empty() {
        return false;
    }
    let mut from = 0;
    while let Some(pos) = haystack[from..].find(needle) {
        let start = from + pos;
        let end = start + needle.len();
        let ok_before = start == 0 || haystack.as_bytes()[start - 1] == b' ';
        let ok_after = end == haystack.len() || haystack.as_bytes()[end] == b' ';
        if ok_before && ok_after {
            return true;
        }
        from = start + 1;
    }
    false
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Yes,
    No,
    Unparseable,
}

/// Yes/no verdicts read from the start of the normalized response.
pub fn parse_yes_no(response: &str) -> Verdict {
    let norm = normalize(response);
    if norm.starts_with("yes") {
        Verdict::Yes
    } else if norm.starts_with("no") {
        Verdict::No
    } else {
        Verdict::Unparseable
    }
}

/// Scan a response for canonical operator mentions. The phrase
/// "with grant option" counts as GRANT. The result is already intersected
/// with the canonical universe by construction.
pub fn parse_operator_list(response: &str) -> PrivilegeSet {
    let norm = normalize(response);
    let mut ops: Vec<Operator> = norm
        .split_whitespace()
        .filter_map(Operator::parse)
        .collect();
    if norm.contains("with grant option") {
        ops.push(Operator::Grant);
    }
    ops.into_iter().collect()
}

/// Case-fold and strip punctuation, collapsing whitespace runs.
fn normalize(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut last_space = true;
    for c in text.chars() {
        if c.is_alphanumeric() || c == '_' {
            for lc in c.to_lowercase() {
                out.push(lc);
            }
            last_space = false;
        } else if !last_space {
            out.push(' ');
            last_space = true;
        }
    }
    while out.ends_with(' ') {
        out.pop();
    }
    out
}

/// Best-effort remainder of the response after the matched candidate.
fn remainder(response: &str, candidate: &str) -> String {
    let lower_resp = response.to_lowercase();
    let lower_cand = candidate.to_lowercase();
    if let Some(pos) = lower_resp.find(&lower_cand) {
        response[pos + lower_cand.len()..]
            .trim_start_matches(|c: char| c.is_whitespace() || "-—:,.;".contains(c))
            .to_string()
    } else {
        response.trim().to_string()
    }
}
