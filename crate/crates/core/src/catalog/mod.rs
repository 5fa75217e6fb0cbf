//! Database adapter: execute scripts, introspect grants and role
//! membership, generate all-SQL access matrices from live state, and compare
//! privilege catalogs for execution-equivalence scoring.
//!
//! The shipped target is [`EmbeddedSandbox`], a disposable in-process
//! instance: the access-control plane (roles, grants, memberships, row
//! policies) is modeled directly, and the data plane (tables, views,
//! queries) runs on an embedded SQL engine. Live servers plug in behind
//! [`CatalogTarget`].

mod sandbox;

pub use sandbox::EmbeddedSandbox;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::acm::{self, AccessMatrix, CellText, Operator, PrivilegeCell, PrivilegeSet};
use crate::error::{Error, Result};
use crate::synthesizer::SqlScript;

/// One catalog grant row: grantee holds `operator` on `asset`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GrantRecord {
    pub grantee: String,
    pub asset: String,
    pub operator: Operator,
    pub grant_option: bool,
}

/// One role-membership row: `parent` inherits the privileges of `child`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct InheritanceRecord {
    pub parent: String,
    pub child: String,
}

/// One row-policy record, carried opaquely for temporal requirements.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PolicyRecord {
    pub name: String,
    pub table: String,
    pub role: String,
    pub condition: String,
}

/// Result of executing one statement.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatementResult {
    pub index: usize,
    pub sql: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl StatementResult {
    pub fn is_ok(&self) -> bool {
        self.error.is_none()
    }
}

/// Named dialect profile: which catalog surfaces a live adapter reads and
/// how access-control SQL is shaped.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DialectProfile {
    pub name: String,
    /// Table-grants view with (grantee, table, privilege, is_grantable).
    pub grants_view: String,
    /// Role-membership view with (parent, member).
    pub membership_view: String,
    pub supports_row_policies: bool,
}

impl DialectProfile {
    pub fn postgres() -> Self {
        DialectProfile {
            name: "postgres".into(),
            grants_view: "information_schema.role_table_grants".into(),
            membership_view: "pg_auth_members".into(),
            supports_row_policies: true,
        }
    }

    /// MySQL-style profile. Shipped as a stub: the catalog view names are
    /// recorded, but no executing adapter targets it yet.
    pub fn mysql() -> Self {
        DialectProfile {
            name: "mysql".into(),
            grants_view: "information_schema.table_privileges".into(),
            membership_view: "mysql.role_edges".into(),
            supports_row_policies: false,
        }
    }

    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "postgres" => Ok(Self::postgres()),
            "mysql" => Ok(Self::mysql()),
            other => Err(Error::Dialect {
                profile: other.to_string(),
                message: "unknown dialect profile".into(),
            }),
        }
    }
}

/// A database target the toolkit can drive. One connection per target;
/// operations on a single target are serialized by single ownership.
pub trait CatalogTarget {
    /// Execute one statement against the target.
    fn execute(&self, sql: &str) -> Result<()>;

    /// All table/view grants, ordered by (grantee, asset, operator).
    fn fetch_grants(&self) -> Result<Vec<GrantRecord>>;

    /// All role memberships, ordered by (parent, child).
    fn fetch_inheritance(&self) -> Result<Vec<InheritanceRecord>>;

    /// All row policies, ordered by name. Empty where unsupported.
    fn fetch_row_policies(&self) -> Result<Vec<PolicyRecord>>;

    /// Up to `limit` distinct values of a column, deterministic order.
    fn fetch_column_values(&self, table: &str, column: &str, limit: usize) -> Result<Vec<String>>;

    /// Run a read-only query; rows rendered as strings with NULL as None.
    fn query_rows(&self, sql: &str) -> Result<Vec<Vec<Option<String>>>>;

    /// Whether a table or view with this name exists on the data plane.
    fn has_relation(&self, name: &str) -> bool;
}

/// Execute a script statement by statement. Each statement's failure is
/// data, not an exception: later statements still run.
pub fn execute_script(script: &SqlScript, target: &dyn CatalogTarget) -> Vec<StatementResult> {
    script
        .statements()
        .iter()
        .enumerate()
        .map(|(index, stmt)| StatementResult {
            index,
            sql: stmt.text.clone(),
            error: target.execute(&stmt.text).err().map(|e| e.to_string()),
        })
        .collect()
}

/// Build an all-SQL access matrix from catalog state.
///
/// Pass 1 buckets grant records into cells (subjects are distinct grantees,
/// assets are distinct granted objects). Pass 2 replaces each role's
/// operators with the union over the role and its descendants through the
/// membership graph. Subjects and assets sort lexicographically.
pub fn generate_acm(grants: &[GrantRecord], inheritance: &[InheritanceRecord]) -> Result<AccessMatrix> {
    let edges: Vec<(&str, &str)> = inheritance
        .iter()
        .map(|r| (r.parent.as_str(), r.child.as_str()))
        .collect();
    if let Some(cycle) = acm::detect_cycle(&edges) {
        return Err(Error::HierarchyCycle(cycle));
    }

    // Grantees of table grants plus roles granted another role: a role whose
    // entire privilege set is inherited still holds privileges. Roles that
    // appear nowhere hold nothing and stay excluded.
    let subjects: BTreeSet<&str> = grants
        .iter()
        .map(|g| g.grantee.as_str())
        .chain(inheritance.iter().map(|r| r.parent.as_str()))
        .collect();
    let assets: BTreeSet<&str> = grants.iter().map(|g| g.asset.as_str()).collect();

    let mut direct: BTreeMap<(&str, &str), PrivilegeSet> = BTreeMap::new();
    for grant in grants {
        let entry = direct.entry((grant.grantee.as_str(), grant.asset.as_str())).or_default();
        let mut ops: Vec<Operator> = entry.iter().collect();
        ops.push(grant.operator);
        if grant.grant_option {
            ops.push(Operator::Grant);
        }
        *entry = ops.into_iter().collect();
    }

    let children: BTreeMap<&str, Vec<&str>> = {
        let mut map: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
        for record in inheritance {
            map.entry(record.parent.as_str()).or_default().push(record.child.as_str());
        }
        map
    };

    fn effective<'a>(
        role: &'a str,
        asset: &str,
        direct: &BTreeMap<(&'a str, &'a str), PrivilegeSet>,
        children: &BTreeMap<&'a str, Vec<&'a str>>,
        seen: &mut BTreeSet<&'a str>,
    ) -> PrivilegeSet {
        if !seen.insert(role) {
            return PrivilegeSet::EMPTY;
        }
        let mut set = direct.get(&(role, asset)).copied().unwrap_or(PrivilegeSet::EMPTY);
        if let Some(kids) = children.get(role) {
            for kid in kids {
                set = set.union(effective(kid, asset, direct, children, seen));
            }
        }
        seen.remove(role);
        set
    }

    let mut cells = Vec::new();
    for subject in &subjects {
        let mut row = Vec::new();
        for asset in &assets {
            let set = effective(subject, asset, &direct, &children, &mut BTreeSet::new());
            row.push(if set.is_empty() {
                PrivilegeCell::empty()
            } else {
                PrivilegeCell { text: Some(CellText::sql(set.render())) }
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

/// Snapshot of a target's access-control state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CatalogSnapshot {
    pub grants: BTreeSet<GrantRecord>,
    pub inheritance: BTreeSet<InheritanceRecord>,
}

impl CatalogSnapshot {
    pub fn take(target: &dyn CatalogTarget) -> Result<Self> {
        Ok(CatalogSnapshot {
            grants: target.fetch_grants()?.into_iter().collect(),
            inheritance: target.fetch_inheritance()?.into_iter().collect(),
        })
    }
}

/// Set equality of (grants, inheritance) between two targets, with a diff
/// listing naming every record present on exactly one side.
pub fn snapshot_equivalence(
    a: &dyn CatalogTarget,
    b: &dyn CatalogTarget,
) -> Result<(bool, Vec<String>)> {
    let snap_a = CatalogSnapshot::take(a)?;
    let snap_b = CatalogSnapshot::take(b)?;
    let mut diff = Vec::new();
    let describe_grant = |g: &GrantRecord, side: &str| {
        format!(
            "only {side}: {} on {} to {}{}",
            g.operator.keyword(),
            g.asset,
            g.grantee,
            if g.grant_option { " with grant option" } else { "" }
        )
    };
    for g in snap_a.grants.difference(&snap_b.grants) {
        diff.push(describe_grant(g, "left"));
    }
    for g in snap_b.grants.difference(&snap_a.grants) {
        diff.push(describe_grant(g, "right"));
    }
    for i in snap_a.inheritance.difference(&snap_b.inheritance) {
        diff.push(format!("only left: {} inherits from {}", i.parent, i.child));
    }
    for i in snap_b.inheritance.difference(&snap_a.inheritance) {
        diff.push(format!("only right: {} inherits from {}", i.parent, i.child));
    }
    Ok((diff.is_empty(), diff))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grant(grantee: &str, asset: &str, operator: Operator, option: bool) -> GrantRecord {
        GrantRecord {
            grantee: grantee.into(),
            asset: asset.into(),
            operator,
            grant_option: option,
        }
    }

    #[test]
    fn empty_catalog_generates_zero_by_zero() {
        let m = generate_acm(&[], &[]).unwrap();
        assert_eq!(m.rows(), 0);
        assert_eq!(m.cols(), 0);
    }

    #[test]
    fn bucketing_by_grantee_and_asset() {
        let grants = vec![
            grant("r", "t1", Operator::Select, false),
            grant("r", "t2", Operator::Select, false),
        ];
        let m = generate_acm(&grants, &[]).unwrap();
        assert_eq!(m.rows(), 1);
        assert_eq!(m.cols(), 2);
        assert_eq!(m.cell(0, 0).raw(), "SELECT");
        assert_eq!(m.cell(0, 1).raw(), "SELECT");
    }

    #[test]
    fn grant_option_becomes_grant_operator() {
        let grants = vec![grant("john", "customer", Operator::Select, true)];
        let m = generate_acm(&grants, &[]).unwrap();
        assert_eq!(m.cell(0, 0).raw(), "SELECT, GRANT");
    }

    #[test]
    fn inheritance_pass_unions_children() {
        let grants = vec![
            grant("p", "t", Operator::Insert, false),
            grant("c", "t", Operator::Select, false),
        ];
        let inheritance = vec![InheritanceRecord { parent: "p".into(), child: "c".into() }];
        let m = generate_acm(&grants, &inheritance).unwrap();
        // Subjects sort lexicographically: c, p.
        assert_eq!(m.subjects()[1].raw, "p");
        assert_eq!(m.cell(1, 0).raw(), "SELECT, INSERT");
        assert_eq!(m.cell(0, 0).raw(), "SELECT");
    }

    #[test]
    fn inheritance_cycle_is_an_error() {
        let grants = vec![grant("a", "t", Operator::Select, false)];
        let inheritance = vec![
            InheritanceRecord { parent: "a".into(), child: "b".into() },
            InheritanceRecord { parent: "b".into(), child: "a".into() },
        ];
        assert!(matches!(generate_acm(&grants, &inheritance), Err(Error::HierarchyCycle(_))));
    }
}
