//! Literal repair for failed statements.
//!
//! Completions sometimes mangle database literals ("Live_Final" becomes
//! "Live Final", "more than 80 centimeters" becomes ">80cm"). When a
//! statement fails to execute, this pass parses out its literals, fetches
//! the real values of the columns the statement touches, and substitutes
//! each failing literal with its nearest neighbor by embedding cosine
//! similarity. Only literal nodes of the parse tree change.

use std::collections::BTreeSet;
use std::ops::ControlFlow;

use sqlparser::ast::{visit_expressions, visit_expressions_mut, visit_relations, Expr, Value};

use super::{parse_single, Embedder, SchemaContext};
use crate::catalog::CatalogTarget;
use crate::error::{Error, Result};

/// How many distinct values to pull per referenced column.
const VALUE_FETCH_LIMIT: usize = 200;

/// Repair the literals of a failed statement against catalog values.
/// Deterministic: ties in similarity break by lexicographic candidate
/// order, and a literal already present among the values is left alone.
pub fn repair_literals(
    statement: &str,
    schema: &SchemaContext,
    catalog: &dyn CatalogTarget,
    embedder: &dyn Embedder,
) -> Result<String> {
    let mut stmt = parse_single(statement, "literal repair")?;

    let mut tables: Vec<String> = Vec::new();
    let _ = visit_relations(&stmt, |name| {
        let name = name.to_string();
        if !tables.contains(&name) {
            tables.push(name);
        }
        ControlFlow::<()>::Continue(())
    });

    let mut columns: Vec<String> = Vec::new();
    let mut literals: Vec<String> = Vec::new();
    let _ = visit_expressions(&stmt, |expr| {
        match expr {
            Expr::Identifier(ident) => {
                let name = ident.value.clone();
                if !columns.contains(&name) {
                    columns.push(name);
                }
            }
            Expr::CompoundIdentifier(parts) => {
                if let Some(last) = parts.last() {
                    let name = last.value.clone();
                    if !columns.contains(&name) {
                        columns.push(name);
                    }
                }
            }
            Expr::Value(value) => {
                if let Some(text) = literal_text(value) {
                    if !literals.contains(&text) {
                        literals.push(text);
                    }
                }
            }
            _ => {}
        }
        ControlFlow::<()>::Continue(())
    });

    if literals.is_empty() {
        return Ok(stmt.to_string());
    }

    // Candidate values from every referenced (table, column) pair the schema
    // actually knows about.
    let mut candidates: Vec<String> = Vec::new();
    let mut seen: BTreeSet<String> = BTreeSet::new();
    for table in &tables {
        let Some(table_def) = schema.table(table) else { continue };
        for column in &columns {
            if !table_def.columns.iter().any(|c| c.name.eq_ignore_ascii_case(column)) {
                continue;
            }
            for value in catalog.fetch_column_values(&table_def.name, column, VALUE_FETCH_LIMIT)? {
                if seen.insert(value.clone()) {
                    candidates.push(value);
                }
            }
        }
    }
    if candidates.is_empty() {
        return Err(Error::RepairUnavailable(format!(
            "no candidate values retrievable for tables {tables:?}"
        )));
    }

    let mut replacements: Vec<(String, String)> = Vec::new();
    for literal in &literals {
        if candidates.iter().any(|c| c == literal) {
            continue;
        }
        let target = embedder.embed(literal);
        let mut best: Option<(&String, f64)> = None;
        for candidate in &candidates {
            let score = target.cosine(&embedder.embed(candidate));
            let better = match best {
                None => true,
                Some((current, best_score)) => {
                    score > best_score || (score == best_score && candidate < current)
                }
            };
            if better {
                best = Some((candidate, score));
            }
        }
        if let Some((candidate, _)) = best {
            replacements.push((literal.clone(), candidate.clone()));
        }
    }

    if !replacements.is_empty() {
        let _ = visit_expressions_mut(&mut stmt, |expr| {
            if let Expr::Value(value) = expr {
                if let Some(text) = literal_text(value) {
                    if let Some((_, replacement)) =
                        replacements.iter().find(|(from, _)| *from == text)
                    {
                        *value = replacement_value(value, replacement);
                    }
                }
            }
            ControlFlow::<()>::Continue(())
        });
    }
    Ok(stmt.to_string())
}

fn literal_text(value: &Value) -> Option<String> {
    match value {
        Value::Number(n, _) => Some(n.clone()),
        Value::SingleQuotedString(s) | Value::DoubleQuotedString(s) => Some(s.clone()),
        _ => None,
    }
}

/// Keep the literal's node type where the replacement allows it: numeric
/// replacements stay numbers, everything else becomes a quoted string.
fn replacement_value(original: &Value, replacement: &str) -> Value {
    match original {
        Value::Number(_, long) if replacement.parse::<f64>().is_ok() => {
            Value::Number(replacement.to_string(), *long)
        }
        Value::DoubleQuotedString(_) => Value::DoubleQuotedString(replacement.to_string()),
        _ => Value::SingleQuotedString(replacement.to_string()),
    }
}
