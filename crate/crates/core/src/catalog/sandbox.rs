//! Disposable in-process database target.
//!
//! The data plane (tables, views, SELECTs) runs on an embedded SQLite
//! connection. The access-control plane has no SQLite counterpart, so roles,
//! grants, role memberships, and row policies are modeled directly and
//! introspected the way a server catalog would be. Identifiers are taken
//! literally; quote-folding is not modeled.

use std::cell::RefCell;
use std::collections::BTreeSet;

use sqlparser::ast::{Action, GrantObjects, Owner, Privileges, Statement};

use super::{CatalogTarget, GrantRecord, InheritanceRecord, PolicyRecord, StatementResult};
use crate::acm::Operator;
use crate::error::{Error, Result};
use crate::synthesizer::parse_single;

#[derive(Default)]
struct AccessState {
    roles: BTreeSet<String>,
    grants: BTreeSet<GrantRecord>,
    memberships: BTreeSet<InheritanceRecord>,
    policies: BTreeSet<PolicyRecord>,
}

pub struct EmbeddedSandbox {
    conn: rusqlite::Connection,
    access: RefCell<AccessState>,
}

impl EmbeddedSandbox {
    pub fn new() -> Result<Self> {
        let conn = rusqlite::Connection::open_in_memory()
            .map_err(|e| Error::Sandbox(e.to_string()))?;
        Ok(EmbeddedSandbox { conn, access: RefCell::new(AccessState::default()) })
    }

    /// Seed the data plane with a batch of DDL/DML. Access-control
    /// statements do not belong here; use [`CatalogTarget::execute`].
    pub fn execute_batch(&self, sql: &str) -> Result<()> {
        self.conn.execute_batch(sql).map_err(|e| Error::Sandbox(e.to_string()))
    }

    /// Split a script text into statements and run each through the routing
    /// in [`CatalogTarget::execute`], collecting per-statement results.
    pub fn execute_all(&self, sql: &str) -> Vec<StatementResult> {
        split_statements(sql)
            .into_iter()
            .enumerate()
            .map(|(index, stmt)| StatementResult {
                index,
                error: self.execute(&stmt).err().map(|e| e.to_string()),
                sql: stmt,
            })
            .collect()
    }

    pub fn roles(&self) -> Vec<String> {
        self.access.borrow().roles.iter().cloned().collect()
    }

    fn require_role(&self, name: &str) -> Result<()> {
        if self.access.borrow().roles.contains(name) {
            return Ok(());
        }
        Err(Error::Sandbox(format!("role {name:?} does not exist")))
    }

    fn require_relation(&self, name: &str) -> Result<()> {
        if self.has_relation(name) {
            return Ok(());
        }
        Err(Error::UnknownTable(name.to_string()))
    }

    fn create_role(&self, name: &str) -> Result<()> {
        let mut access = self.access.borrow_mut();
        if !access.roles.insert(name.to_string()) {
            return Err(Error::Sandbox(format!("role {name:?} already exists")));
        }
        Ok(())
    }

    fn apply_grant(
        &self,
        operators: &[Operator],
        assets: &[String],
        grantees: &[String],
        grant_option: bool,
    ) -> Result<()> {
        for grantee in grantees {
            self.require_role(grantee)?;
        }
        for asset in assets {
            self.require_relation(asset)?;
        }
        let mut access = self.access.borrow_mut();
        for grantee in grantees {
            for asset in assets {
                for op in operators {
                    access.grants.insert(GrantRecord {
                        grantee: grantee.clone(),
                        asset: asset.clone(),
                        operator: *op,
                        grant_option,
                    });
                }
            }
        }
        Ok(())
    }

    fn apply_role_grant(&self, granted: &str, to: &str) -> Result<()> {
        self.require_role(granted)?;
        self.require_role(to)?;
        // `to` becomes a member of `granted` and inherits its privileges.
        self.access
            .borrow_mut()
            .memberships
            .insert(InheritanceRecord { parent: to.to_string(), child: granted.to_string() });
        Ok(())
    }
}

impl CatalogTarget for EmbeddedSandbox {
    fn execute(&self, sql: &str) -> Result<()> {
        let trimmed = sql.trim().trim_end_matches(';').trim();
        if trimmed.is_empty() {
            return Ok(());
        }
        match classify(trimmed)? {
            Routed::CreateRole(name) => self.create_role(&name),
            Routed::GrantPrivileges { operators, assets, grantees, grant_option } => {
                self.apply_grant(&operators, &assets, &grantees, grant_option)
            }
            Routed::GrantRole { granted, to } => self.apply_role_grant(&granted, &to),
            Routed::CreatePolicy(policy) => {
                self.require_relation(&policy.table)?;
                self.access.borrow_mut().policies.insert(policy);
                Ok(())
            }
            Routed::Data => {
                self.conn
                    .execute_batch(sql)
                    .map_err(|e| Error::Sandbox(format!("{e} in {trimmed:?}")))?;
                // The engine validates views lazily; probe eagerly so a
                // definition over missing relations fails at creation, the
                // way a server would.
                if let Ok(Statement::CreateView { name, .. }) = parse_single(trimmed, "sandbox") {
                    let probe = format!("SELECT * FROM {name} LIMIT 0");
                    if let Err(e) = self.query_rows(&probe) {
                        let _ = self.conn.execute_batch(&format!("DROP VIEW {name}"));
                        return Err(Error::Sandbox(format!("invalid view {name}: {e}")));
                    }
                }
                Ok(())
            }
        }
    }

    fn fetch_grants(&self) -> Result<Vec<GrantRecord>> {
        Ok(self.access.borrow().grants.iter().cloned().collect())
    }

    fn fetch_inheritance(&self) -> Result<Vec<InheritanceRecord>> {
        Ok(self.access.borrow().memberships.iter().cloned().collect())
    }

    fn fetch_row_policies(&self) -> Result<Vec<PolicyRecord>> {
        Ok(self.access.borrow().policies.iter().cloned().collect())
    }

    fn fetch_column_values(&self, table: &str, column: &str, limit: usize) -> Result<Vec<String>> {
        if !self.has_relation(table) {
            return Err(Error::UnknownTable(table.to_string()));
        }
        let columns = self.relation_columns(table)?;
        if !columns.iter().any(|c| c.eq_ignore_ascii_case(column)) {
            return Err(Error::UnknownColumn { table: table.to_string(), column: column.to_string() });
        }
        let sql = format!(
            "SELECT DISTINCT {col} FROM {tab} WHERE {col} IS NOT NULL ORDER BY 1 LIMIT {limit}",
            col = quote_ident(column),
            tab = quote_ident(table),
        );
        let rows = self.query_rows(&sql)?;
        Ok(rows.into_iter().filter_map(|mut r| r.pop().flatten()).collect())
    }

    fn query_rows(&self, sql: &str) -> Result<Vec<Vec<Option<String>>>> {
        let mut stmt = self.conn.prepare(sql).map_err(|e| Error::Sandbox(e.to_string()))?;
        let width = stmt.column_count();
        let rows = stmt
            .query_map([], |row| {
                let mut out = Vec::with_capacity(width);
                for i in 0..width {
                    let value = match row.get_ref(i)? {
                        rusqlite::types::ValueRef::Null => None,
                        rusqlite::types::ValueRef::Integer(v) => Some(v.to_string()),
                        rusqlite::types::ValueRef::Real(v) => Some(v.to_string()),
                        rusqlite::types::ValueRef::Text(t) => {
                            Some(String::from_utf8_lossy(t).into_owned())
                        }
                        rusqlite::types::ValueRef::Blob(b) => {
                            Some(b.iter().map(|x| format!("{x:02x}")).collect())
                        }
                    };
                    out.push(value);
                }
                Ok(out)
            })
            .map_err(|e| Error::Sandbox(e.to_string()))?
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::Sandbox(e.to_string()))?;
        Ok(rows)
    }

    fn has_relation(&self, name: &str) -> bool {
        self.conn
            .query_row(
                "SELECT count(*) FROM sqlite_master WHERE type IN ('table','view') AND lower(name) = lower(?1)",
                [name],
                |row| row.get::<_, i64>(0),
            )
            .map(|n| n > 0)
            .unwrap_or(false)
    }
}

impl EmbeddedSandbox {
    fn relation_columns(&self, table: &str) -> Result<Vec<String>> {
        let sql = format!("SELECT * FROM {} LIMIT 0", quote_ident(table));
        let stmt = self.conn.prepare(&sql).map_err(|e| Error::Sandbox(e.to_string()))?;
        Ok(stmt.column_names().into_iter().map(|s| s.to_string()).collect())
    }
}

enum Routed {
    CreateRole(String),
    GrantPrivileges {
        operators: Vec<Operator>,
        assets: Vec<String>,
        grantees: Vec<String>,
        grant_option: bool,
    },
    GrantRole {
        granted: String,
        to: String,
    },
    CreatePolicy(PolicyRecord),
    Data,
}

/// Route a statement to the access plane or the data plane.
fn classify(sql: &str) -> Result<Routed> {
    let words: Vec<String> = sql.split_whitespace().map(|w| w.to_uppercase()).collect();
    let starts_with = |prefix: &[&str]| {
        words.len() >= prefix.len() && prefix.iter().zip(&words).all(|(p, w)| p == w)
    };

    // CREATE USER and role-to-role GRANT are regular enough to read off the
    // tokens; the grammar does not cover them.
    if starts_with(&["CREATE", "USER"]) || starts_with(&["CREATE", "ROLE"]) {
        let name = sql
            .split_whitespace()
            .nth(2)
            .map(|w| w.trim_end_matches(';').to_string())
            .filter(|w| !w.is_empty())
            .ok_or_else(|| Error::Sandbox(format!("missing role name in {sql:?}")))?;
        return Ok(Routed::CreateRole(name));
    }
    if starts_with(&["GRANT"]) && !words.iter().any(|w| w == "ON") {
        let tokens: Vec<&str> = sql.split_whitespace().collect();
        if tokens.len() == 4 && tokens[2].eq_ignore_ascii_case("to") {
            return Ok(Routed::GrantRole {
                granted: tokens[1].trim_end_matches(',').to_string(),
                to: tokens[3].trim_end_matches(';').to_string(),
            });
        }
        return Err(Error::Sandbox(format!("unsupported GRANT form: {sql:?}")));
    }

    if starts_with(&["GRANT"]) || starts_with(&["CREATE", "POLICY"]) {
        return match parse_single(sql, "sandbox")? {
            Statement::Grant { privileges, objects, grantees, with_grant_option, .. } => {
                let operators = map_privileges(&privileges)?;
                let assets = match objects {
                    GrantObjects::Tables(names) => {
                        names.iter().map(|n| n.to_string()).collect::<Vec<_>>()
                    }
                    other => {
                        return Err(Error::Sandbox(format!(
                            "unsupported grant object class: {other}"
                        )))
                    }
                };
                Ok(Routed::GrantPrivileges {
                    operators,
                    assets,
                    grantees: grantees.iter().map(|g| g.to_string()).collect(),
                    grant_option: with_grant_option,
                })
            }
            Statement::CreatePolicy { name, table_name, to, using, .. } => {
                let role = to
                    .as_ref()
                    .and_then(|owners| owners.first())
                    .map(|owner| match owner {
                        Owner::Ident(ident) => ident.to_string(),
                        other => other.to_string(),
                    })
                    .unwrap_or_else(|| "PUBLIC".to_string());
                let condition = using.map(|e| e.to_string()).unwrap_or_default();
                Ok(Routed::CreatePolicy(PolicyRecord {
                    name: name.to_string(),
                    table: table_name.to_string(),
                    role,
                    condition,
                }))
            }
            _ => Ok(Routed::Data),
        };
    }
    Ok(Routed::Data)
}

fn map_privileges(privileges: &Privileges) -> Result<Vec<Operator>> {
    match privileges {
        Privileges::All { .. } => Ok(vec![
            Operator::Select,
            Operator::Insert,
            Operator::Update,
            Operator::Delete,
            Operator::Create,
        ]),
        Privileges::Actions(actions) => actions
            .iter()
            .map(|action| match action {
                Action::Select { .. } => Ok(Operator::Select),
                Action::Insert { .. } => Ok(Operator::Insert),
                Action::Update { .. } => Ok(Operator::Update),
                Action::Delete => Ok(Operator::Delete),
                Action::Create => Ok(Operator::Create),
                other => Err(Error::Sandbox(format!("unsupported privilege: {other}"))),
            })
            .collect(),
    }
}

/// Quote-aware statement splitter for multi-statement script texts.
fn split_statements(sql: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut current = String::new();
    let mut quote: Option<char> = None;
    for c in sql.chars() {
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
                    let stmt = current.trim().to_string();
                    if !stmt.is_empty() {
                        out.push(format!("{stmt};"));
                    }
                    current.clear();
                }
                _ => current.push(c),
            },
        }
    }
    let tail = current.trim().to_string();
    if !tail.is_empty() {
        out.push(tail);
    }
    out
}

fn quote_ident(name: &str) -> String {
    format!("\"{}\"", name.replace('"', "\"\""))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fresh_sandbox_has_empty_catalogs() {
        let sb = EmbeddedSandbox::new().unwrap();
        assert!(sb.fetch_grants().unwrap().is_empty());
        assert!(sb.fetch_inheritance().unwrap().is_empty());
    }

    #[test]
    fn grant_lands_in_catalog() {
        let sb = EmbeddedSandbox::new().unwrap();
        sb.execute_batch("CREATE TABLE t (a INT);").unwrap();
        sb.execute("CREATE ROLE r;").unwrap();
        sb.execute("GRANT SELECT ON t TO r;").unwrap();
        assert_eq!(
            sb.fetch_grants().unwrap(),
            vec![GrantRecord {
                grantee: "r".into(),
                asset: "t".into(),
                operator: Operator::Select,
                grant_option: false
            }]
        );
    }

    #[test]
    fn role_grant_records_inheritance() {
        let sb = EmbeddedSandbox::new().unwrap();
        sb.execute("CREATE ROLE c;").unwrap();
        sb.execute("CREATE ROLE p;").unwrap();
        sb.execute("GRANT c TO p;").unwrap();
        assert_eq!(
            sb.fetch_inheritance().unwrap(),
            vec![InheritanceRecord { parent: "p".into(), child: "c".into() }]
        );
    }

    #[test]
    fn grant_option_round_trips() {
        let sb = EmbeddedSandbox::new().unwrap();
        sb.execute_batch("CREATE TABLE customer (id INT);").unwrap();
        sb.execute("CREATE ROLE John;").unwrap();
        sb.execute("GRANT SELECT ON customer TO John WITH GRANT OPTION;").unwrap();
        let grants = sb.fetch_grants().unwrap();
        assert!(grants[0].grant_option);
    }

    #[test]
    fn grants_require_existing_role_and_relation() {
        let sb = EmbeddedSandbox::new().unwrap();
        assert!(sb.execute("GRANT SELECT ON t TO ghost;").is_err());
        sb.execute("CREATE ROLE ghost;").unwrap();
        assert!(matches!(sb.execute("GRANT SELECT ON t TO ghost;"), Err(Error::UnknownTable(_))));
    }

    #[test]
    fn duplicate_role_rejected() {
        let sb = EmbeddedSandbox::new().unwrap();
        sb.execute("CREATE ROLE r;").unwrap();
        assert!(sb.execute("CREATE ROLE r;").is_err());
        // CREATE USER shares the namespace.
        assert!(sb.execute("CREATE USER r;").is_err());
    }

    #[test]
    fn create_policy_recorded_opaquely() {
        let sb = EmbeddedSandbox::new().unwrap();
        sb.execute_batch("CREATE TABLE t (a INT);").unwrap();
        sb.execute("CREATE ROLE r;").unwrap();
        sb.execute("CREATE POLICY p ON t TO r USING (a > 1);").unwrap();
        let policies = sb.fetch_row_policies().unwrap();
        assert_eq!(policies.len(), 1);
        assert_eq!(policies[0].role, "r");
        assert_eq!(policies[0].condition, "a > 1");
    }

    #[test]
    fn column_values_are_distinct_ordered_and_bounded() {
        let sb = EmbeddedSandbox::new().unwrap();
        sb.execute_batch(
            "CREATE TABLE t (s TEXT); INSERT INTO t VALUES ('b'),('a'),('b'),(NULL),('c');",
        )
        .unwrap();
        assert_eq!(sb.fetch_column_values("t", "s", 10).unwrap(), vec!["a", "b", "c"]);
        assert_eq!(sb.fetch_column_values("t", "s", 2).unwrap(), vec!["a", "b"]);
        assert!(matches!(
            sb.fetch_column_values("t", "nope", 10),
            Err(Error::UnknownColumn { .. })
        ));
        assert!(matches!(sb.fetch_column_values("nope", "s", 10), Err(Error::UnknownTable(_))));
    }

    #[test]
    fn data_plane_views_are_queryable() {
        let sb = EmbeddedSandbox::new().unwrap();
        sb.execute_batch("CREATE TABLE t (a INT); INSERT INTO t VALUES (1),(2);").unwrap();
        sb.execute("CREATE VIEW v AS SELECT a FROM t WHERE a > 1;").unwrap();
        let rows = sb.query_rows("SELECT * FROM v").unwrap();
        assert_eq!(rows, vec![vec![Some("2".to_string())]]);
        assert!(sb.has_relation("v"));
    }

    #[test]
    fn execute_all_reports_per_statement() {
        let sb = EmbeddedSandbox::new().unwrap();
        let results = sb.execute_all(
            "CREATE ROLE a; CREATE ROLE a; CREATE TABLE t (x INT); GRANT SELECT ON t TO a;",
        );
        assert_eq!(results.len(), 4);
        assert!(results[0].is_ok());
        assert!(!results[1].is_ok());
        assert!(results[2].is_ok());
        assert!(results[3].is_ok(), "{:?}", results[3]);
    }

    #[test]
    fn splitter_ignores_semicolons_in_strings() {
        let stmts = split_statements("INSERT INTO t VALUES ('a;b'); SELECT 1");
        assert_eq!(stmts.len(), 2);
        assert_eq!(stmts[0], "INSERT INTO t VALUES ('a;b');");
    }
}
