//! NL/SQL classification and literal extraction heuristics.

use super::TextKind;

/// Keywords whose presence as a standalone uppercase token marks a
/// descriptor as SQL.
const ANCHOR_KEYWORDS: [&str; 8] = [
    "SELECT", "GRANT", "CREATE", "INSERT", "UPDATE", "DELETE", "FROM", "VIEW",
];

/// Reserved words excluded from literal extraction.
const RESERVED_WORDS: [&str; 40] = [
    "SELECT", "GRANT", "CREATE", "INSERT", "UPDATE", "DELETE", "FROM", "VIEW", "WHERE", "AND",
    "OR", "NOT", "ORDER", "GROUP", "BY", "HAVING", "JOIN", "INNER", "LEFT", "RIGHT", "OUTER",
    "ON", "AS", "TO", "WITH", "OPTION", "ROLE", "USER", "TABLE", "DISTINCT", "LIMIT", "OFFSET",
    "COUNT", "SUM", "AVG", "MIN", "MAX", "UNION", "ALL", "BETWEEN",
];

/// Classify a descriptor as NL or SQL by scanning for standalone,
/// case-sensitive uppercase anchor keywords. Total and deterministic; the
/// empty string is NL.
pub fn classify_text(text: &str) -> TextKind {
    for token in tokens(text) {
        if ANCHOR_KEYWORDS.contains(&token) {
            return TextKind::SQL;
        }
    }
    TextKind::NL
}

/// Extract likely database literals from a descriptor, in order of
/// appearance, deduplicated:
///
/// 1. contents of single- or double-quoted spans,
/// 2. standalone numeric tokens,
/// 3. identifier-shaped tokens with an underscore or internal capitalization
///    that are not SQL reserved words.
///
/// Plain capitalized English words are deliberately not extracted, so prose
/// descriptors prune nothing by accident.
pub fn extract_literals(text: &str) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    let mut push = |s: String| {
        if !s.is_empty() && !out.contains(&s) {
            out.push(s);
        }
    };

    let chars: Vec<char> = text.chars().collect();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c == '\'' || c == '"' {
            if let Some(end) = chars[i + 1..].iter().position(|&d| d == c) {
                let span: String = chars[i + 1..i + 1 + end].iter().collect();
                push(span);
                i += end + 2;
                continue;
            }
        }
        i += 1;
    }

    for token in raw_tokens(text) {
        if is_numeric_token(token) {
            // Keep decimals whole; only non-numeric tokens split on dots.
            push(token.to_string());
            continue;
        }
        for part in token.split('.').filter(|p| !p.is_empty()) {
            if is_numeric_token(part) || is_literal_identifier(part) {
                push(part.to_string());
            }
        }
    }
    out
}

/// Case/underscore-insensitive form used when comparing extracted literals,
/// matching the normalization the literal-repair step applies.
pub fn normalize_literal(literal: &str) -> String {
    literal.to_lowercase().replace('_', " ")
}

fn tokens(text: &str) -> impl Iterator<Item = &str> {
    raw_tokens(text).flat_map(|t| t.split('.')).filter(|t| !t.is_empty())
}

fn raw_tokens(text: &str) -> impl Iterator<Item = &str> {
    text.split(|c: char| !(c.is_alphanumeric() || c == '_' || c == '.'))
        .map(|t| t.trim_matches('.'))
        .filter(|t| !t.is_empty())
}

fn is_numeric_token(token: &str) -> bool {
    let mut seen_dot = false;
    let mut seen_digit = false;
    for c in token.chars() {
        match c {
            '0'..='9' => seen_digit = true,
            '.' if !seen_dot => seen_dot = true,
            _ => return false,
        }
    }
    seen_digit
}

fn is_literal_identifier(token: &str) -> bool {
    if token.chars().next().is_none_or(|c| c.is_ascii_digit()) {
        return false;
    }
    let upper = token.to_uppercase();
    if RESERVED_WORDS.contains(&upper.as_str()) {
        return false;
    }
    if token.contains('_') {
        return true;
    }
    // Internal capitalization: an uppercase letter after the first position
    // in a token that also carries lowercase letters ("camelCase",
    // "LiveFinal"), as opposed to plain capitalization ("John") or acronyms
    // ("ACS").
    let has_lower = token.chars().any(|c| c.is_lowercase());
    let internal_upper = token.chars().skip(1).any(|c| c.is_uppercase());
    has_lower && internal_upper
}
