//! Generalized multi-requirement pipeline: requirement identification,
//! dependency-graph resolution (from human instructions or prompts),
//! generalized synthesis, implementation extraction from catalog state,
//! dependency-based revisions, generalized auditing, and the
//! parse-check-feedback loop.

mod bundle;
mod instructions;

pub use bundle::{load_bundle, OpaqueTable, PolicyBundle, PolicyTable};
pub use instructions::{parse_instructions, ExecutionGraph, Step};

use std::collections::{BTreeMap, BTreeSet};
use std::ops::ControlFlow;

use serde::{Deserialize, Serialize};

use crate::acm::{AccessMatrix, CellText, PrivilegeCell, PrivilegeSet};
use crate::catalog::CatalogTarget;
use crate::differencer::{Differencer, ItemKind, ViolationReport};
use crate::error::{Error, Result};
use crate::gateway::{Gateway, SlotValue, Slots};
use crate::hierarchy::{parse_grant_text, privilege_closure};
use crate::synthesizer::{grant_statement, parse_single, SchemaContext};

/// Identify what category of deployment requirement a policy table carries.
/// An empty documentation slot renders as "(none)".
pub fn identify_requirement(gateway: &Gateway, table: &PolicyTable, doc: &str) -> Result<String> {
    let doc = if doc.trim().is_empty() { "(none)" } else { doc };
    let slots: Slots = [
        ("table", SlotValue::text(table.render())),
        ("documentation", SlotValue::text(doc)),
    ]
    .into_iter()
    .collect();
    Ok(gateway.ask("requirement_identify", &slots)?.trim().to_string())
}

/// Resolve the execution graph. A human-instructions file is the reliable
/// default; prompt-based resolution is opt-in via [`resolve_dependencies_llm`].
pub fn resolve_dependencies(bundle: &PolicyBundle, labels: &[String], instructions: &str) -> Result<ExecutionGraph> {
    let graph = parse_instructions(instructions, labels)?;
    graph.validate(bundle.tables.len())?;
    Ok(graph)
}

/// Prompt-based dependency resolution: one instructions prompt plus the two
/// follow-ups, parsed into the same graph shape.
pub fn resolve_dependencies_llm(
    gateway: &Gateway,
    bundle: &PolicyBundle,
    labels: &[String],
) -> Result<ExecutionGraph> {
    let tables_rendered = bundle
        .tables
        .iter()
        .map(|t| t.render())
        .collect::<Vec<_>>()
        .join("\n\n");
    let docs_rendered = bundle.docs.join("\n");
    let slots: Slots = [
        ("labels", SlotValue::candidates(labels.iter().cloned())),
        ("tables", SlotValue::text(tables_rendered)),
        ("documentation", SlotValue::text(docs_rendered)),
        ("backend", SlotValue::text(&bundle.backend)),
    ]
    .into_iter()
    .collect();
    let instructions_text = gateway.ask("deployment_instructions", &slots)?;

    let followup = |template: &str| -> Result<String> {
        let slots: Slots = [
            ("labels", SlotValue::candidates(labels.iter().cloned())),
            ("instructions", SlotValue::text(&instructions_text)),
        ]
        .into_iter()
        .collect();
        gateway.ask(template, &slots)
    };
    let tables_answer = followup("instructions_tables_followup")?;
    let deps_answer = followup("instructions_deps_followup")?;

    let graph = instructions::from_llm_answers(&instructions_text, &tables_answer, &deps_answer, labels)?;
    graph.validate(bundle.tables.len())?;
    Ok(graph)
}

/// Report for one synthesis step.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StepReport {
    pub step: usize,
    pub instruction: String,
    pub statements: Vec<String>,
    pub feedback_rounds: u32,
    pub residual_findings: Vec<String>,
}

/// Generalized synthesis output: the concatenated code plus per-step
/// reports.
#[derive(Debug, Clone)]
pub struct GeneralizedSynthesis {
    pub code: String,
    pub statements: Vec<String>,
    pub steps: Vec<StepReport>,
}

/// One prompt per topological step, embedding the step's policy tables,
/// their documentation, the instruction text, and the schema. Code blocks
/// are extracted and parsed before execution; statements with nonexistent
/// references go through the feedback loop.
pub fn synthesize_generalized(
    gateway: &Gateway,
    bundle: &PolicyBundle,
    schema: &SchemaContext,
    graph: &ExecutionGraph,
    catalog: &dyn CatalogTarget,
    max_feedback_rounds: u32,
) -> Result<GeneralizedSynthesis> {
    let mut all_statements: Vec<String> = Vec::new();
    let mut steps = Vec::new();
    for step in graph.topological()? {
        let requirements = step
            .tables
            .iter()
            .map(|&i| bundle.tables[i].render())
            .collect::<Vec<_>>()
            .join("\n\n");
        let documentation = step
            .tables
            .iter()
            .map(|&i| bundle.docs[i].clone())
            .collect::<Vec<_>>()
            .join("\n");
        let slots: Slots = [
            ("backend", SlotValue::text(&bundle.backend)),
            ("requirements", SlotValue::text(requirements)),
            ("documentation", SlotValue::text(documentation)),
            ("instructions", SlotValue::text(&step.text)),
            ("schema", SlotValue::text(schema.schema_string())),
            ("schema_info", SlotValue::text(schema.context_string())),
        ]
        .into_iter()
        .collect();
        let prompt = gateway.render_prompt("generalized_synthesis", &slots)?;
        let response = gateway.complete("generalized_synthesis", &prompt)?;
        let code = extract_code(&response);

        let outcome = feedback_loop(gateway, &prompt, &code, schema, catalog, max_feedback_rounds)?;
        all_statements.extend(outcome.statements.clone());
        steps.push(StepReport {
            step: step.index,
            instruction: step.text.clone(),
            statements: outcome.statements,
            feedback_rounds: outcome.rounds,
            residual_findings: outcome.residual_findings,
        });
    }
    Ok(GeneralizedSynthesis {
        code: all_statements.join("\n"),
        statements: all_statements,
        steps,
    })
}

/// Feedback-loop output: the last code revision, its statements, the number
/// of re-prompt rounds spent, and whatever findings remain.
#[derive(Debug, Clone)]
pub struct FeedbackOutcome {
    pub code: String,
    pub statements: Vec<String>,
    pub rounds: u32,
    pub residual_findings: Vec<String>,
}

/// Check code against the database for nonexistent tables, columns, and
/// column values; on findings, re-prompt with the error list appended, at
/// most `max_rounds` times.
pub fn feedback_loop(
    gateway: &Gateway,
    original_prompt: &str,
    code: &str,
    schema: &SchemaContext,
    catalog: &dyn CatalogTarget,
    max_rounds: u32,
) -> Result<FeedbackOutcome> {
    let mut current = code.to_string();
    let mut rounds = 0;
    loop {
        let (statements, findings) = check_code(&current, schema, catalog)?;
        if findings.is_empty() || rounds >= max_rounds {
            return Ok(FeedbackOutcome {
                code: current,
                statements,
                rounds,
                residual_findings: findings,
            });
        }
        let slots: Slots = [
            ("previous_prompt", SlotValue::text(original_prompt)),
            ("previous_code", SlotValue::text(&current)),
            ("errors", SlotValue::text(findings.join("\n"))),
        ]
        .into_iter()
        .collect();
        let response = gateway.ask("synthesis_feedback", &slots)?;
        current = extract_code(&response);
        rounds += 1;
    }
}

/// Parse statements and verify their schema references and equality-compared
/// string literals exist. Statements that do not parse are findings too.
fn check_code(
    code: &str,
    schema: &SchemaContext,
    catalog: &dyn CatalogTarget,
) -> Result<(Vec<String>, Vec<String>)> {
    let mut findings = Vec::new();
    let mut statements = Vec::new();
    for stmt_text in split_code(code) {
        statements.push(stmt_text.clone());
        if is_access_statement(&stmt_text) {
            continue;
        }
        let stmt = match parse_single(&stmt_text, "feedback check") {
            Ok(stmt) => stmt,
            Err(e) => {
                findings.push(format!("statement does not parse: {e}"));
                continue;
            }
        };
        // The object a DDL statement defines is not a reference.
        let defined = match &stmt {
            sqlparser::ast::Statement::CreateView { name, .. } => Some(name.to_string()),
            sqlparser::ast::Statement::CreateTable(inner) => Some(inner.name.to_string()),
            _ => None,
        };
        let mut tables: Vec<String> = Vec::new();
        let _ = sqlparser::ast::visit_relations(&stmt, |name| {
            let name = name.to_string();
            if Some(&name) != defined.as_ref() && !tables.contains(&name) {
                tables.push(name);
            }
            ControlFlow::<()>::Continue(())
        });
        let mut known_tables: Vec<&crate::synthesizer::TableDef> = Vec::new();
        for table in &tables {
            match schema.table(table) {
                Some(def) => known_tables.push(def),
                None => findings.push(format!("table {table:?} does not exist")),
            }
        }
        let resolve = |column: &str| {
            known_tables
                .iter()
                .find(|t| t.columns.iter().any(|c| c.name.eq_ignore_ascii_case(column)))
        };
        let _ = sqlparser::ast::visit_expressions(&stmt, |expr| {
            use sqlparser::ast::{BinaryOperator, Expr, Value};
            match expr {
                Expr::Identifier(column) if !known_tables.is_empty() => {
                    if resolve(&column.value).is_none() {
                        let finding = format!("column {:?} does not exist", column.value);
                        if !findings.contains(&finding) {
                            findings.push(finding);
                        }
                    }
                }
                Expr::BinaryOp { left, op: BinaryOperator::Eq, right } => {
                    if let (
                        Expr::Identifier(column),
                        Expr::Value(Value::SingleQuotedString(value)),
                    ) = (left.as_ref(), right.as_ref())
                    {
                        if let Some(table) = resolve(&column.value) {
                            if let Ok(values) =
                                catalog.fetch_column_values(&table.name, &column.value, 1000)
                            {
                                if !values.iter().any(|v| v == value) {
                                    findings.push(format!(
                                        "value {value:?} not found in column {:?} of table {:?}",
                                        column.value, table.name
                                    ));
                                }
                            }
                        }
                    }
                }
                _ => {}
            }
            ControlFlow::<()>::Continue(())
        });
    }
    Ok((statements, findings))
}

fn is_access_statement(sql: &str) -> bool {
    let upper = sql.trim().to_uppercase();
    upper.starts_with("CREATE ROLE")
        || upper.starts_with("CREATE USER")
        || upper.starts_with("GRANT")
        || upper.starts_with("CREATE POLICY")
}

/// Pull SQL out of a completion: fenced code blocks when present, the whole
/// response otherwise.
fn extract_code(response: &str) -> String {
    let mut blocks = Vec::new();
    let mut in_block = false;
    let mut current = String::new();
    for line in response.lines() {
        if line.trim_start().starts_with("```") {
            if in_block {
                blocks.push(current.clone());
                current.clear();
            }
            in_block = !in_block;
            continue;
        }
        if in_block {
            current.push_str(line);
            current.push('\n');
        }
    }
    if blocks.is_empty() {
        response.trim().to_string()
    } else {
        blocks.join("\n")
    }
}

fn split_code(code: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut current = String::new();
    let mut quote: Option<char> = None;
    for c in code.chars() {
        match quote {
            Some(q) => {
                current.push(c);
                if c == q {
                    quote = None;
                }
            }
            None => match c {
                '\'' | '"' => {
                    quote = Some(c);
                    current.push(c);
                }
                ';' => {
                    let stmt: String = current.split_whitespace().collect::<Vec<_>>().join(" ");
                    if !stmt.is_empty() {
                        out.push(format!("{stmt};"));
                    }
                    current.clear();
                }
                _ => current.push(c),
            },
        }
    }
    let tail: String = current.split_whitespace().collect::<Vec<_>>().join(" ");
    if !tail.is_empty() && !tail.starts_with("--") {
        out.push(format!("{tail};"));
    }
    out
}

/// How to extract one requirement's implementation table from the catalog.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ExtractionQuery {
    TableGrants,
    RoleMemberships,
    RowPolicies,
    /// A user-supplied read-only query against the data plane.
    Sql { query: String },
}

/// Per-requirement-label extraction queries.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ExtractionQuerySet {
    pub queries: BTreeMap<String, ExtractionQuery>,
}

impl ExtractionQuerySet {
    pub fn from_json(bytes: &[u8]) -> Result<Self> {
        let queries: BTreeMap<String, ExtractionQuery> = serde_json::from_slice(bytes)?;
        let set = ExtractionQuerySet { queries };
        set.validate()?;
        Ok(set)
    }

    /// Every user query must be read-only.
    pub fn validate(&self) -> Result<()> {
        for (label, query) in &self.queries {
            if let ExtractionQuery::Sql { query } = query {
                match parse_single(query, "extraction query")? {
                    sqlparser::ast::Statement::Query(_) => {}
                    _ => {
                        return Err(Error::Bundle(format!(
                            "extraction query for {label:?} is not read-only"
                        )))
                    }
                }
            }
        }
        Ok(())
    }
}

/// An all-SQL implementation table mirroring its policy table's semantics.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum ImplementationTable {
    /// Subjects x assets grid whose cells are the implementing statements.
    Matrix(AccessMatrix),
    /// (role, child) inheritance pairs.
    Pairs(Vec<(String, String)>),
    Opaque(OpaqueTable),
}

/// Implementation tables keyed by requirement label.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ImplementationSet {
    pub tables: BTreeMap<String, ImplementationTable>,
}

/// Extract implementation tables from live catalog state, one per
/// requirement label.
pub fn extract_implementation(
    queries: &ExtractionQuerySet,
    target: &dyn CatalogTarget,
) -> Result<ImplementationSet> {
    let mut tables = BTreeMap::new();
    for (label, query) in &queries.queries {
        let table = match query {
            ExtractionQuery::TableGrants => {
                ImplementationTable::Matrix(grants_matrix(target)?)
            }
            ExtractionQuery::RoleMemberships => ImplementationTable::Pairs(
                target
                    .fetch_inheritance()?
                    .into_iter()
                    .map(|r| (r.parent, r.child))
                    .collect(),
            ),
            ExtractionQuery::RowPolicies => ImplementationTable::Matrix(policies_matrix(target)?),
            ExtractionQuery::Sql { query } => {
                let rows = target.query_rows(query)?;
                ImplementationTable::Opaque(OpaqueTable {
                    name: label.clone(),
                    columns: vec![],
                    rows: rows
                        .into_iter()
                        .map(|r| r.into_iter().map(|v| v.unwrap_or_default()).collect())
                        .collect(),
                })
            }
        };
        tables.insert(label.clone(), table);
    }
    Ok(ImplementationSet { tables })
}

/// Privilege implementation table: the (i, j)th cell holds the GRANT
/// statement granting role i's operators on asset j.
fn grants_matrix(target: &dyn CatalogTarget) -> Result<AccessMatrix> {
    let grants = target.fetch_grants()?;
    let subjects: BTreeSet<&str> = grants.iter().map(|g| g.grantee.as_str()).collect();
    let assets: BTreeSet<&str> = grants.iter().map(|g| g.asset.as_str()).collect();
    let mut cells = Vec::new();
    for subject in &subjects {
        let mut row = Vec::new();
        for asset in &assets {
            let mut ops: Vec<crate::acm::Operator> = grants
                .iter()
                .filter(|g| g.grantee == *subject && g.asset == *asset)
                .map(|g| g.operator)
                .collect();
            let option = grants
                .iter()
                .any(|g| g.grantee == *subject && g.asset == *asset && g.grant_option);
            if option {
                ops.push(crate::acm::Operator::Grant);
            }
            let set: PrivilegeSet = ops.into_iter().collect();
            row.push(if set.is_empty() {
                PrivilegeCell::empty()
            } else {
                PrivilegeCell { text: Some(CellText::sql(grant_statement(subject, asset, set)?)) }
            });
        }
        cells.push(row);
    }
    AccessMatrix::new(
        subjects.iter().map(|s| CellText::sql(*s)).collect(),
        assets.iter().map(|a| CellText::sql(*a)).collect(),
        cells,
    )
}

/// Temporal implementation table: roles x tables with the policy condition
/// text in the cells.
fn policies_matrix(target: &dyn CatalogTarget) -> Result<AccessMatrix> {
    let policies = target.fetch_row_policies()?;
    let subjects: BTreeSet<&str> = policies.iter().map(|p| p.role.as_str()).collect();
    let assets: BTreeSet<&str> = policies.iter().map(|p| p.table.as_str()).collect();
    let mut cells = Vec::new();
    for subject in &subjects {
        let mut row = Vec::new();
        for asset in &assets {
            let conditions: Vec<&str> = policies
                .iter()
                .filter(|p| p.role == *subject && p.table == *asset)
                .map(|p| p.condition.as_str())
                .collect();
            row.push(if conditions.is_empty() {
                PrivilegeCell::empty()
            } else {
                PrivilegeCell { text: Some(CellText::sql(conditions.join("; "))) }
            });
        }
        cells.push(row);
    }
    AccessMatrix::new(
        subjects.iter().map(|s| CellText::sql(*s)).collect(),
        assets.iter().map(|a| CellText::sql(*a)).collect(),
        cells,
    )
}

/// A pure, named transformation over implementation tables.
pub trait RevisionHook {
    fn name(&self) -> &str;
    fn apply(&self, tables: &ImplementationSet) -> Result<ImplementationSet>;
}

/// Apply hooks left to right.
pub fn apply_revisions(
    tables: &ImplementationSet,
    hooks: &[&dyn RevisionHook],
) -> Result<ImplementationSet> {
    let mut current = tables.clone();
    for hook in hooks {
        current = hook.apply(&current)?;
    }
    Ok(current)
}

/// Built-in revision: union every role's privileges with all privileges
/// inherited through the hierarchy table. Idempotent, since a closure of a
/// closure is itself.
pub struct HierarchyUnionHook {
    pub privileges_label: String,
    pub hierarchy_label: String,
}

impl RevisionHook for HierarchyUnionHook {
    fn name(&self) -> &str {
        "hierarchy-union"
    }

    fn apply(&self, tables: &ImplementationSet) -> Result<ImplementationSet> {
        let Some(ImplementationTable::Pairs(pairs)) = tables.tables.get(&self.hierarchy_label)
        else {
            return Ok(tables.clone());
        };
        let Some(ImplementationTable::Matrix(matrix)) = tables.tables.get(&self.privileges_label)
        else {
            return Ok(tables.clone());
        };
        let edges: Vec<(String, String)> = pairs.clone();

        let mut out = tables.clone();
        let mut new_cells = Vec::new();
        for i in 0..matrix.rows() {
            let mut row = Vec::new();
            for j in 0..matrix.cols() {
                // Per-asset base map over all roles.
                let base: BTreeMap<String, PrivilegeSet> = matrix
                    .subjects()
                    .iter()
                    .enumerate()
                    .map(|(k, s)| (s.raw.clone(), cell_operators(matrix.cell(k, j))))
                    .collect();
                let closure =
                    privilege_closure(&matrix.subjects()[i].raw, &edges, &base)?;
                let asset = &matrix.assets()[j].raw;
                row.push(if closure.is_empty() {
                    PrivilegeCell::empty()
                } else {
                    PrivilegeCell {
                        text: Some(CellText::sql(grant_statement(
                            &matrix.subjects()[i].raw,
                            asset,
                            closure,
                        )?)),
                    }
                });
            }
            new_cells.push(row);
        }
        let revised = AccessMatrix::new(
            matrix.subjects().to_vec(),
            matrix.assets().to_vec(),
            new_cells,
        )?;
        out.tables.insert(self.privileges_label.clone(), ImplementationTable::Matrix(revised));
        Ok(out)
    }
}

/// Operators stated by an implementation cell, whether it is an operator
/// list or a full GRANT statement.
fn cell_operators(cell: &PrivilegeCell) -> PrivilegeSet {
    if cell.is_empty() {
        return PrivilegeSet::EMPTY;
    }
    if let crate::acm::ParsedPrivileges::Set(set) = cell.parse() {
        return set;
    }
    parse_grant_text(cell.raw()).map(|(_, _, set)| set).unwrap_or(PrivilegeSet::EMPTY)
}

/// Generalized audit of one (policy table, implementation table) pair. The
/// deployment element shape comes from the table structure: subjects x
/// assets grids compare cell privileges, (role, child) tables compare
/// inheritance relationships.
pub fn audit_generalized(
    gateway: &Gateway,
    policy: &PolicyTable,
    implementation: &ImplementationTable,
) -> Result<ViolationReport> {
    match (policy, implementation) {
        (PolicyTable::Matrix(policy_matrix), ImplementationTable::Matrix(impl_matrix)) => {
            let differencer = Differencer::new(gateway);
            let normalized = normalize_impl_matrix(impl_matrix)?;
            differencer.diff(policy_matrix, &normalized)
        }
        (PolicyTable::Hierarchy(rhl), ImplementationTable::Pairs(impl_pairs)) => {
            let policy_pairs: Vec<(CellText, CellText)> = rhl
                .rows()
                .iter()
                .filter_map(|row| {
                    row.child.as_ref().map(|c| (row.role.clone(), c.clone()))
                })
                .collect();
            let mut report = ViolationReport::default();
            let differencer = Differencer::new(gateway);
            let mut claimed = vec![false; impl_pairs.len()];
            for (role, child) in &policy_pairs {
                let mut hit = None;
                for (k, (impl_role, impl_child)) in impl_pairs.iter().enumerate() {
                    if claimed[k] {
                        continue;
                    }
                    if element_matches(&differencer, role, impl_role)?
                        && element_matches(&differencer, child, impl_child)?
                    {
                        hit = Some(k);
                        break;
                    }
                }
                match hit {
                    Some(k) => claimed[k] = true,
                    None => report
                        .inheritance_missing
                        .push((role.raw.clone(), child.raw.clone())),
                }
            }
            for (k, (impl_role, impl_child)) in impl_pairs.iter().enumerate() {
                if !claimed[k] {
                    report.inheritance_extra.push((impl_role.clone(), impl_child.clone()));
                }
            }
            Ok(report)
        }
        (PolicyTable::Opaque(policy_table), _) => {
            Err(Error::UnsupportedRequirement(policy_table.name.clone()))
        }
        _ => Err(Error::UnsupportedRequirement(
            "policy and implementation table shapes do not correspond".into(),
        )),
    }
}

/// Rewrite GRANT-statement cells into canonical operator lists so the
/// deterministic subsumption path applies.
fn normalize_impl_matrix(matrix: &AccessMatrix) -> Result<AccessMatrix> {
    let cells: Vec<Vec<PrivilegeCell>> = matrix
        .cells()
        .iter()
        .map(|row| {
            row.iter()
                .map(|cell| {
                    if cell.is_empty() {
                        return cell.clone();
                    }
                    if cell.raw().trim_start().to_uppercase().starts_with("GRANT") {
                        if let Ok((_, _, set)) = parse_grant_text(cell.raw()) {
                            return PrivilegeCell { text: Some(CellText::sql(set.render())) };
                        }
                    }
                    cell.clone()
                })
                .collect()
        })
        .collect();
    AccessMatrix::new(matrix.subjects().to_vec(), matrix.assets().to_vec(), cells)
}

fn element_matches(differencer: &Differencer<'_>, left: &CellText, right: &str) -> Result<bool> {
    if left.raw.trim() == right.trim() {
        return Ok(true);
    }
    let right_cell = CellText::sql(right);
    let outcome = differencer.map_items(
        std::slice::from_ref(left),
        std::slice::from_ref(&right_cell),
        ItemKind::Role,
    );
    Ok(!outcome.pairs.is_empty())
}
