//! Query-type taxonomy and the per-category synthesis accuracy table.

use std::collections::BTreeMap;
use std::ops::ControlFlow;

use serde::{Deserialize, Serialize};

use crate::synthesizer::parse_single;

/// Category rows in presentation order.
pub const CATEGORY_ORDER: [&str; 9] = [
    "Single column Projection",
    "Multiple column Projection",
    "Single Whole-table Aggregation",
    "Single join",
    "Multi-way join",
    "Common Table Expression",
    "Nested Queries",
    "Single WHERE clause condition",
    "Multiple WHERE clause conditions",
];

/// Classify a view-defining query by keyword tests, most specific first:
/// nested subqueries, then HAVING (the common-table-expression category is
/// keyed on that keyword), then join width, aggregation, condition count,
/// and projection width.
pub fn classify_query(sql: &str) -> &'static str {
    let upper = sql.to_uppercase();
    let normalized: String = upper
        .chars()
        .map(|c| if c.is_whitespace() { ' ' } else { c })
        .collect::<String>()
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ");

    let select_count = normalized.matches("SELECT").count();
    if select_count > 1 {
        return "Nested Queries";
    }
    if normalized.contains("HAVING") {
        return "Common Table Expression";
    }

    let table_count = count_tables(sql);
    if table_count > 3 {
        return "Multi-way join";
    }
    if table_count >= 2 || normalized.contains(" JOIN ") {
        return "Single join";
    }
    if normalized.contains("GROUP BY") {
        return "Single Whole-table Aggregation";
    }
    if let Some(where_pos) = normalized.find(" WHERE ") {
        let tail = &normalized[where_pos + 7..];
        let clause = tail.split(" GROUP BY ").next().unwrap_or(tail);
        let clause = clause.split(" ORDER BY ").next().unwrap_or(clause);
        let predicates = 1 + clause.matches(" AND ").count() + clause.matches(" OR ").count();
        return if predicates > 1 {
            "Multiple WHERE clause conditions"
        } else {
            "Single WHERE clause condition"
        };
    }
    if projection_width(sql) > 1 {
        "Multiple column Projection"
    } else {
        "Single column Projection"
    }
}

fn count_tables(sql: &str) -> usize {
    let Ok(stmt) = parse_single(sql, "taxonomy") else {
        return 1;
    };
    let mut names = std::collections::BTreeSet::new();
    let _ = sqlparser::ast::visit_relations(&stmt, |name| {
        names.insert(name.to_string());
        ControlFlow::<()>::Continue(())
    });
    names.len().max(1)
}

fn projection_width(sql: &str) -> usize {
    use sqlparser::ast::{SetExpr, Statement};
    let query = match parse_single(sql, "taxonomy") {
        Ok(Statement::Query(q)) => Some(q),
        Ok(Statement::CreateView { query, .. }) => Some(query),
        _ => None,
    };
    match query {
        Some(q) => match q.body.as_ref() {
            SetExpr::Select(select) => select.projection.len(),
            _ => 1,
        },
        None => 1,
    }
}

/// Per-category correct/total tallies with a grand total, rendered the way
/// synthesizer accuracy is reported.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SynthesisTable {
    tallies: BTreeMap<String, (u64, u64)>,
}

impl SynthesisTable {
    pub fn record(&mut self, category: &str, correct: bool) {
        let entry = self.tallies.entry(category.to_string()).or_insert((0, 0));
        entry.1 += 1;
        if correct {
            entry.0 += 1;
        }
    }

    pub fn category(&self, name: &str) -> Option<(u64, u64)> {
        self.tallies.get(name).copied()
    }

    pub fn total(&self) -> (u64, u64) {
        self.tallies
            .values()
            .fold((0, 0), |(c, t), (dc, dt)| (c + dc, t + dt))
    }

    /// Rows in canonical category order, then any unknown categories
    /// alphabetically, followed by the total row.
    pub fn rows(&self) -> Vec<(String, u64, u64)> {
        let mut out = Vec::new();
        for name in CATEGORY_ORDER {
            if let Some((c, t)) = self.tallies.get(name) {
                out.push((name.to_string(), *c, *t));
            }
        }
        for (name, (c, t)) in &self.tallies {
            if !CATEGORY_ORDER.contains(&name.as_str()) {
                out.push((name.clone(), *c, *t));
            }
        }
        let (c, t) = self.total();
        out.push(("Total Accuracy".to_string(), c, t));
        out
    }

    pub fn render(&self) -> String {
        self.rows()
            .into_iter()
            .map(|(name, c, t)| format!("{name} {c}/{t}"))
            .collect::<Vec<_>>()
            .join("\n")
    }
}
