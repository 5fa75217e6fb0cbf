//! Policy synthesis: access matrix -> SQL script.
//!
//! The pipeline runs four steps: role statements, view statements, privilege
//! mapping, and grant assembly. SQL-tagged headers bypass the gateway
//! entirely; natural-language headers go through the prompt catalog. Failed
//! view completions that reference wrong database literals are repaired
//! deterministically in [`repair`].

mod embed;
mod repair;

pub use embed::{Embedder, Embedding, TrigramEmbedder};
pub use repair::repair_literals;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use sqlparser::ast::Statement;
use sqlparser::dialect::PostgreSqlDialect;
use sqlparser::parser::Parser;

use crate::acm::{AccessMatrix, CellText, Operator, ParsedPrivileges, PrivilegeCell, PrivilegeSet};
use crate::error::{Error, Result};
use crate::gateway::{parse_operator_list, Gateway, SlotValue, Slots};

/// Statement classes in a synthesized script, in required script order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum StatementKind {
    CreateRole,
    CreateUser,
    CreateView,
    Grant,
    GrantRole,
}

impl StatementKind {
    /// Assembly phase: role/user creation, then views, then grants.
    fn phase(self) -> u8 {
        match self {
            StatementKind::CreateRole | StatementKind::CreateUser => 0,
            StatementKind::CreateView => 1,
            StatementKind::Grant | StatementKind::GrantRole => 2,
        }
    }
}

/// One script statement, optionally tied back to the matrix cell it
/// implements.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptStatement {
    pub kind: StatementKind,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<(usize, usize)>,
}

impl ScriptStatement {
    pub fn new(kind: StatementKind, text: impl Into<String>) -> Self {
        ScriptStatement { kind, text: text.into(), provenance: None }
    }

    pub fn with_provenance(kind: StatementKind, text: impl Into<String>, cell: (usize, usize)) -> Self {
        ScriptStatement { kind, text: text.into(), provenance: Some(cell) }
    }
}

/// Ordered statement list: all role/user creation first, then views, then
/// grants. Grant texts must parse under the target dialect grammar.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SqlScript {
    statements: Vec<ScriptStatement>,
}

impl SqlScript {
    pub fn new(statements: Vec<ScriptStatement>) -> Result<Self> {
        let mut last_phase = 0u8;
        for stmt in &statements {
            let phase = stmt.kind.phase();
            if phase < last_phase {
                return Err(Error::Synthesis {
                    context: "script assembly".into(),
                    message: format!(
                        "statement {:?} out of order: roles, then views, then grants",
                        stmt.text
                    ),
                });
            }
            last_phase = phase;
            if stmt.kind == StatementKind::Grant {
                parse_single(&stmt.text, "grant statement")?;
            }
        }
        Ok(SqlScript { statements })
    }

    pub fn statements(&self) -> &[ScriptStatement] {
        &self.statements
    }

    pub fn grants(&self) -> impl Iterator<Item = &ScriptStatement> {
        self.statements
            .iter()
            .filter(|s| matches!(s.kind, StatementKind::Grant | StatementKind::GrantRole))
    }

    /// The script as executable SQL text, one statement per line.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for stmt in &self.statements {
            out.push_str(stmt.text.trim());
            if !stmt.text.trim_end().ends_with(';') {
                out.push(';');
            }
            out.push('\n');
        }
        out
    }
}

/// Parse exactly one statement under the shipped dialect grammar.
pub fn parse_single(sql: &str, context: &str) -> Result<Statement> {
    let mut parsed = Parser::parse_sql(&PostgreSqlDialect {}, sql).map_err(|e| Error::SqlParse {
        context: context.to_string(),
        message: e.to_string(),
    })?;
    if parsed.len() != 1 {
        return Err(Error::SqlParse {
            context: context.to_string(),
            message: format!("expected one statement, found {}", parsed.len()),
        });
    }
    Ok(parsed.remove(0))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnDef {
    pub name: String,
    #[serde(rename = "type", default)]
    pub data_type: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableDef {
    pub name: String,
    pub columns: Vec<ColumnDef>,
}

/// Database schema description handed to prompts and the repair step.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SchemaContext {
    pub tables: Vec<TableDef>,
    /// Named dialect profile; the shipped default targets postgres-style
    /// catalogs.
    #[serde(default = "default_dialect")]
    pub dialect_profile: String,
    /// Column definitions from a data dictionary, keyed `table.column`.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub data_dictionary: BTreeMap<String, String>,
    /// Sample values keyed `table.column`.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub value_samples: BTreeMap<String, Vec<String>>,
}

fn default_dialect() -> String {
    "postgres".to_string()
}

impl SchemaContext {
    pub fn new(tables: Vec<TableDef>) -> Self {
        SchemaContext {
            tables,
            dialect_profile: default_dialect(),
            data_dictionary: BTreeMap::new(),
            value_samples: BTreeMap::new(),
        }
    }

    pub fn from_json(bytes: &[u8]) -> Result<Self> {
        Ok(serde_json::from_slice(bytes)?)
    }

    pub fn table(&self, name: &str) -> Option<&TableDef> {
        self.tables.iter().find(|t| t.name.eq_ignore_ascii_case(name))
    }

    pub fn has_column(&self, table: &str, column: &str) -> bool {
        self.table(table)
            .is_some_and(|t| t.columns.iter().any(|c| c.name.eq_ignore_ascii_case(column)))
    }

    /// Schema rendered as `table (col, col), table (col)` for prompts.
    pub fn schema_string(&self) -> String {
        self.tables
            .iter()
            .map(|t| {
                let cols = t.columns.iter().map(|c| c.name.as_str()).collect::<Vec<_>>().join(", ");
                format!("{} ({})", t.name, cols)
            })
            .collect::<Vec<_>>()
            .join(", ")
    }

    /// Data dictionary and value samples rendered as prompt context; empty
    /// string when neither is present.
    pub fn context_string(&self) -> String {
        let mut out = String::new();
        for (key, definition) in &self.data_dictionary {
            out.push_str(&format!("-- {key}: {definition}\n"));
        }
        for (key, values) in &self.value_samples {
            out.push_str(&format!("-- values of {key}: {}\n", values.join(", ")));
        }
        out
    }

    /// DDL creating every table, for seeding sandboxes.
    pub fn to_ddl(&self) -> String {
        self.tables
            .iter()
            .map(|t| {
                let cols = t
                    .columns
                    .iter()
                    .map(|c| {
                        if c.data_type.is_empty() {
                            format!("{} TEXT", c.name)
                        } else {
                            format!("{} {}", c.name, c.data_type)
                        }
                    })
                    .collect::<Vec<_>>()
                    .join(", ");
                format!("CREATE TABLE {} ({});", t.name, cols)
            })
            .collect::<Vec<_>>()
            .join("\n")
    }
}

/// Role-synthesis output: statements plus the descriptor -> label map that
/// downstream child/parent resolution consumes.
#[derive(Debug, Clone)]
pub struct RoleSynthesis {
    pub statements: Vec<ScriptStatement>,
    pub labels: BTreeMap<String, String>,
}

/// Per-cell outcome in the synthesis report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CellReport {
    pub cell: (usize, usize),
    pub status: String,
    pub statements: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Full synthesis result: the (possibly partial) script plus per-cell
/// reports and the header label maps.
#[derive(Debug, Clone)]
pub struct SynthesisOutcome {
    pub script: SqlScript,
    pub report: Vec<CellReport>,
    pub role_labels: BTreeMap<String, String>,
    pub view_labels: BTreeMap<String, String>,
}

impl SynthesisOutcome {
    pub fn failed_cells(&self) -> usize {
        self.report.iter().filter(|r| r.status != "ok").count()
    }
}

pub struct Synthesizer<'g> {
    gateway: &'g Gateway,
}

impl<'g> Synthesizer<'g> {
    pub fn new(gateway: &'g Gateway) -> Self {
        Synthesizer { gateway }
    }

    /// One CREATE ROLE per subject. SQL-tagged subjects and bare-identifier
    /// descriptors become labels directly; other NL descriptors go through
    /// the role-label prompt. Label collisions get numeric suffixes.
    pub fn synthesize_roles(&self, matrix: &AccessMatrix) -> Result<RoleSynthesis> {
        let mut statements = Vec::new();
        let mut labels: BTreeMap<String, String> = BTreeMap::new();
        let mut taken: Vec<String> = Vec::new();
        for subject in matrix.subjects() {
            let label = self.role_label(subject)?;
            let label = disambiguate(label, &taken);
            taken.push(label.clone());
            statements.push(ScriptStatement::new(
                StatementKind::CreateRole,
                format!("CREATE ROLE {label};"),
            ));
            labels.insert(subject.raw.clone(), label);
        }
        Ok(RoleSynthesis { statements, labels })
    }

    /// Resolve one subject descriptor to a role label.
    pub fn role_label(&self, subject: &CellText) -> Result<String> {
        if subject.is_sql() {
            if let Ok(Statement::CreateRole { names, .. }) = parse_single(&subject.raw, "role") {
                if let Some(name) = names.first() {
                    return Ok(name.to_string());
                }
            }
            return Ok(if is_identifier(&subject.raw) {
                subject.raw.clone()
            } else {
                sanitize_label(&subject.raw)
            });
        }
        if is_identifier(&subject.raw) {
            return Ok(subject.raw.clone());
        }
        let slots: Slots = [("description", SlotValue::text(&subject.raw))].into_iter().collect();
        let response = self.gateway.ask("role_label", &slots)?;
        let label = sanitize_label(&response);
        if label.is_empty() {
            return Err(Error::EmptyLabel { subject: subject.raw.clone() });
        }
        Ok(label)
    }

    /// One CREATE VIEW per asset needing one. Bare table names pass through
    /// with no statement; SQL definitions pass through verbatim (bare
    /// SELECTs wrapped); NL descriptions are completed by the gateway with
    /// one retry on unparseable output. Returns the statement (if any) and
    /// the label grants should target.
    pub fn synthesize_view(
        &self,
        asset: &CellText,
        index: usize,
        schema: &SchemaContext,
    ) -> Result<(Option<ScriptStatement>, String)> {
        let raw = asset.raw.trim();
        if is_identifier(raw) && schema.table(raw).is_some() {
            return Ok((None, raw.to_string()));
        }
        if asset.is_sql() {
            if let Ok(stmt) = parse_single(raw, "asset") {
                match stmt {
                    Statement::CreateView { name, .. } => {
                        return Ok((
                            Some(ScriptStatement::new(StatementKind::CreateView, ensure_semicolon(raw))),
                            name.to_string(),
                        ));
                    }
                    Statement::Query(_) => {
                        let label = format!("v_{index}");
                        let text = format!("CREATE VIEW {label} AS {}", ensure_semicolon(raw));
                        return Ok((Some(ScriptStatement::new(StatementKind::CreateView, text)), label));
                    }
                    _ => {}
                }
            }
            if is_identifier(raw) {
                return Ok((None, raw.to_string()));
            }
            return Err(Error::Synthesis {
                context: format!("asset {raw:?}"),
                message: "SQL asset is neither a view definition, a SELECT, nor a table name".into(),
            });
        }

        let slots: Slots = [
            ("schema", SlotValue::text(schema.schema_string())),
            ("context", SlotValue::text(schema.context_string())),
            ("description", SlotValue::text(raw)),
        ]
        .into_iter()
        .collect();
        let response = self.gateway.ask("view_completion", &slots)?;
        match complete_view_statement(&response) {
            Ok((stmt, label)) => Ok((Some(stmt), label)),
            Err(_) => {
                let retry_slots: Slots = [
                    ("schema", SlotValue::text(schema.schema_string())),
                    ("context", SlotValue::text(schema.context_string())),
                    ("description", SlotValue::text(raw)),
                    ("previous", SlotValue::text(&response)),
                ]
                .into_iter()
                .collect();
                let second = self.gateway.ask("view_completion_retry", &retry_slots)?;
                complete_view_statement(&second)
                    .map(|(stmt, label)| (Some(stmt), label))
                    .map_err(|_| Error::UnparseableCompletion { raw: second })
            }
        }
    }

    /// Map one privilege cell to operators: the deterministic fast path when
    /// the cell is already an operator list, otherwise the privilege prompt.
    /// A non-empty cell that yields no operators is an error, never silently
    /// dropped.
    pub fn synthesize_privileges(
        &self,
        cell: &PrivilegeCell,
        position: (usize, usize),
        role_label: &str,
        view_label: &str,
    ) -> Result<PrivilegeSet> {
        if let ParsedPrivileges::Set(set) = cell.parse() {
            return Ok(set);
        }
        let slots: Slots = [
            ("statement", SlotValue::text(cell.raw())),
            ("role", SlotValue::text(role_label)),
            ("view", SlotValue::text(view_label)),
        ]
        .into_iter()
        .collect();
        let response = self.gateway.ask("privilege_map", &slots)?;
        let set = parse_operator_list(&response);
        if set.is_empty() {
            return Err(Error::EmptyPrivilegeAnswer { row: position.0, col: position.1 });
        }
        Ok(set)
    }

    /// Compose the four steps over the whole matrix. Empty cells produce no
    /// grant; per-cell failures are collected in the report and the partial
    /// script is still returned.
    pub fn synthesize(&self, matrix: &AccessMatrix, schema: &SchemaContext) -> Result<SynthesisOutcome> {
        let roles = self.synthesize_roles(matrix)?;
        let mut statements = roles.statements.clone();

        let mut view_labels: BTreeMap<String, String> = BTreeMap::new();
        let mut view_errors: BTreeMap<usize, String> = BTreeMap::new();
        let mut view_statements = Vec::new();
        for (j, asset) in matrix.assets().iter().enumerate() {
            match self.synthesize_view(asset, j, schema) {
                Ok((stmt, label)) => {
                    if let Some(stmt) = stmt {
                        view_statements.push(stmt);
                    }
                    view_labels.insert(asset.raw.clone(), label);
                }
                Err(e) => {
                    view_errors.insert(j, e.to_string());
                }
            }
        }
        statements.extend(view_statements);

        let mut report = Vec::new();
        let mut grant_statements = Vec::new();
        for (i, j, cell) in matrix.granting_cells() {
            let subject = &matrix.subjects()[i];
            let asset = &matrix.assets()[j];
            if let Some(err) = view_errors.get(&j) {
                report.push(CellReport {
                    cell: (i, j),
                    status: "error".into(),
                    statements: vec![],
                    error: Some(err.clone()),
                });
                continue;
            }
            let role_label = &roles.labels[&subject.raw];
            let view_label = &view_labels[&asset.raw];
            let outcome = self
                .synthesize_privileges(cell, (i, j), role_label, view_label)
                .and_then(|privs| grant_statement(role_label, view_label, privs));
            match outcome {
                Ok(text) => {
                    report.push(CellReport {
                        cell: (i, j),
                        status: "ok".into(),
                        statements: vec![text.clone()],
                        error: None,
                    });
                    grant_statements.push(ScriptStatement::with_provenance(
                        StatementKind::Grant,
                        text,
                        (i, j),
                    ));
                }
                Err(e) => report.push(CellReport {
                    cell: (i, j),
                    status: "error".into(),
                    statements: vec![],
                    error: Some(e.to_string()),
                }),
            }
        }
        statements.extend(grant_statements);

        Ok(SynthesisOutcome {
            script: SqlScript::new(statements)?,
            report,
            role_labels: roles.labels,
            view_labels,
        })
    }

    /// Synthesize, then validate every view statement against a scratch
    /// catalog: each view is executed there and its literals are repaired
    /// against the real column values. Repair also runs for views that
    /// execute but carry alien literals, since permissive engines turn a
    /// mangled literal into a silently empty view rather than an error.
    /// Returns the outcome with repaired view texts plus a log.
    ///
    /// The scratch catalog should be a disposable sandbox seeded with the
    /// schema and representative data; executing there does not touch the
    /// deployment target.
    pub fn synthesize_repaired(
        &self,
        matrix: &AccessMatrix,
        schema: &SchemaContext,
        scratch: &dyn crate::catalog::CatalogTarget,
        embedder: &dyn Embedder,
    ) -> Result<(SynthesisOutcome, Vec<String>)> {
        let mut outcome = self.synthesize(matrix, schema)?;
        let mut log = Vec::new();
        let mut statements = outcome.script.statements().to_vec();
        for stmt in &mut statements {
            if stmt.kind != StatementKind::CreateView {
                continue;
            }
            let execution_error = scratch.execute(&stmt.text).err();
            let canonical = parse_single(&stmt.text, "repair pass")?.to_string();
            match repair_literals(&stmt.text, schema, scratch, embedder) {
                Ok(repaired) if repaired != canonical => {
                    let repaired = ensure_semicolon(&repaired);
                    if execution_error.is_none() {
                        // Replace the view the unrepaired statement created.
                        if let Statement::CreateView { name, .. } =
                            parse_single(&stmt.text, "repair pass")?
                        {
                            let _ = scratch.execute(&format!("DROP VIEW {name};"));
                        }
                    }
                    match scratch.execute(&repaired) {
                        Ok(()) => {
                            log.push(format!("repaired: {} -> {repaired}", stmt.text));
                            stmt.text = repaired;
                        }
                        Err(second_error) => {
                            log.push(format!(
                                "repair of {} did not execute: {second_error}",
                                stmt.text
                            ));
                            if execution_error.is_none() {
                                let _ = scratch.execute(&stmt.text);
                            }
                        }
                    }
                }
                Ok(_) => {
                    if let Some(error) = execution_error {
                        log.push(format!("view failed and no literal repair applied: {error}"));
                    }
                }
                Err(repair_error) => {
                    if let Some(error) = execution_error {
                        log.push(format!("{error}; {repair_error}"));
                    }
                }
            }
        }
        outcome.script = SqlScript::new(statements)?;
        Ok((outcome, log))
    }
}

/// Render a grant: operators minus GRANT in canonical order, with
/// `WITH GRANT OPTION` appended when GRANT is a member.
pub fn grant_statement(role_label: &str, asset_label: &str, privs: PrivilegeSet) -> Result<String> {
    let ops: PrivilegeSet = privs.difference([Operator::Grant].into_iter().collect());
    if ops.is_empty() {
        return Err(Error::GrantAlone);
    }
    let suffix = if privs.contains(Operator::Grant) { " WITH GRANT OPTION" } else { "" };
    Ok(format!("GRANT {} ON {asset_label} TO {role_label}{suffix};", ops.render()))
}

fn complete_view_statement(response: &str) -> Result<(ScriptStatement, String)> {
    let cleaned = strip_code_fences(response);
    let cleaned = cleaned.trim();
    let text = if cleaned.to_uppercase().starts_with("CREATE VIEW") {
        cleaned.to_string()
    } else {
        format!("CREATE VIEW {cleaned}")
    };
    let text = ensure_semicolon(&text);
    match parse_single(&text, "view completion")? {
        Statement::CreateView { name, .. } => {
            Ok((ScriptStatement::new(StatementKind::CreateView, text), name.to_string()))
        }
        _ => Err(Error::SqlParse {
            context: "view completion".into(),
            message: "completion did not yield a CREATE VIEW".into(),
        }),
    }
}

fn strip_code_fences(text: &str) -> String {
    let trimmed = text.trim();
    if !trimmed.starts_with("```") {
        return trimmed.to_string();
    }
    trimmed
        .lines()
        .filter(|line| !line.trim_start().starts_with("```"))
        .collect::<Vec<_>>()
        .join("\n")
}

fn ensure_semicolon(sql: &str) -> String {
    let trimmed = sql.trim();
    if trimmed.ends_with(';') {
        trimmed.to_string()
    } else {
        format!("{trimmed};")
    }
}

pub(crate) fn is_identifier(text: &str) -> bool {
    let mut chars = text.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// Sanitize a free-text label answer into the identifier charset.
fn sanitize_label(text: &str) -> String {
    let mut out = String::new();
    for c in text.trim().chars() {
        if c.is_ascii_alphanumeric() {
            out.push(c.to_ascii_lowercase());
        } else if !out.is_empty() && !out.ends_with('_') {
            out.push('_');
        }
    }
    let out = out.trim_matches('_').to_string();
    if out.chars().next().is_some_and(|c| c.is_ascii_digit()) {
        format!("r_{out}")
    } else {
        out
    }
}

fn disambiguate(label: String, taken: &[String]) -> String {
    if !taken.contains(&label) {
        return label;
    }
    let mut n = 2;
    loop {
        let candidate = format!("{label}_{n}");
        if !taken.contains(&candidate) {
            return candidate;
        }
        n += 1;
    }
}
