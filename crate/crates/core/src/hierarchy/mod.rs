//! Role-hierarchy engine: the two-pass similarity join of an access matrix
//! with a role-hierarchy list, label resolution for parents and children,
//! transitive privilege closure, and the inheritance-aware script rewrite.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::acm::{
    detect_cycle, AccessMatrix, CellText, ExtendedAccessMatrix, HierarchyAnnotation, PrivilegeSet,
    RoleHierarchyList,
};
use crate::error::{Error, Result};
use crate::gateway::{parse_choice, parse_subset, parse_yes_no, Gateway, SlotValue, Slots, Verdict};
use crate::synthesizer::{grant_statement, parse_single, ScriptStatement, SqlScript, StatementKind};

/// One matched (matrix role, hierarchy-list role) pair.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchPair {
    pub left: CellText,
    pub right: CellText,
    pub explanation: String,
}

/// Bipartite matching between matrix roles and hierarchy-list roles. Each
/// right-side role is consumed by at most one pair; left sides may repeat.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchSet {
    pairs: Vec<MatchPair>,
}

impl MatchSet {
    pub fn new(pairs: Vec<MatchPair>) -> Result<Self> {
        let mut rights = BTreeSet::new();
        for pair in &pairs {
            if !rights.insert(pair.right.raw.as_str()) {
                return Err(Error::Synthesis {
                    context: "match set".into(),
                    message: format!("right-side role {:?} matched twice", pair.right.raw),
                });
            }
        }
        Ok(MatchSet { pairs })
    }

    pub fn pairs(&self) -> &[MatchPair] {
        &self.pairs
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn rights_for<'a>(&'a self, left: &str) -> impl Iterator<Item = &'a CellText> {
        let left = left.to_string();
        self.pairs.iter().filter(move |p| p.left.raw == left).map(|p| &p.right)
    }
}

/// Result of the first similarity-join pass. A gateway failure mid-iteration
/// leaves a partial match set and a cursor to resume from.
#[derive(Debug, Clone)]
pub struct MatchOutcome {
    pub matches: MatchSet,
    /// Index of the first unprocessed left role, when the pass was cut short.
    pub resume_at: Option<usize>,
    pub error: Option<String>,
}

/// A match pair the audit pass rejected.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SuspectPair {
    pub pair: MatchPair,
    pub explanation: String,
}

/// Audit output: every suspect is a member of the audited match set, and the
/// verdict is always "reject"; correction is the user's call.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct AuditFindings {
    pub suspect_pairs: Vec<SuspectPair>,
}

/// First pass: iterate matrix roles in order, prompting against the
/// shrinking list of unconsumed hierarchy-list roles. Consumed roles never
/// reappear as candidates, so duplicate selections cannot occur.
pub fn bipartite_match(
    gateway: &Gateway,
    m_roles: &[CellText],
    l_roles: &[CellText],
) -> Result<MatchOutcome> {
    for (name, list) in [("matrix", m_roles), ("hierarchy list", l_roles)] {
        if list.is_empty() {
            return Err(Error::Synthesis {
                context: "bipartite match".into(),
                message: format!("{name} role list is empty"),
            });
        }
        let mut seen = BTreeSet::new();
        for role in list {
            if !seen.insert(role.raw.as_str()) {
                return Err(Error::Synthesis {
                    context: "bipartite match".into(),
                    message: format!("duplicate {name} role {:?}", role.raw),
                });
            }
        }
    }

    let mut remaining: Vec<&CellText> = l_roles.iter().collect();
    let mut pairs: Vec<MatchPair> = Vec::new();
    for (idx, left) in m_roles.iter().enumerate() {
        if remaining.is_empty() {
            break;
        }
        let slots: Slots = [
            ("phrase", SlotValue::text(&left.raw)),
            ("list", SlotValue::candidates(remaining.iter().map(|r| r.raw.clone()))),
        ]
        .into_iter()
        .collect();
        let response = match gateway.ask("role_subset_match", &slots) {
            Ok(response) => response,
            Err(e) => {
                return Ok(MatchOutcome {
                    matches: MatchSet::new(pairs)?,
                    resume_at: Some(idx),
                    error: Some(e.to_string()),
                });
            }
        };
        let candidate_raws: Vec<&str> = remaining.iter().map(|r| r.raw.as_str()).collect();
        let selected = parse_subset(&response, &candidate_raws);
        for &i in &selected {
            pairs.push(MatchPair {
                left: left.clone(),
                right: remaining[i].clone(),
                explanation: response.trim().to_string(),
            });
        }
        // Remove consumed rights, highest index first.
        for &i in selected.iter().rev() {
            remaining.remove(i);
        }
    }
    Ok(MatchOutcome { matches: MatchSet::new(pairs)?, resume_at: None, error: None })
}

/// Second pass: one yes/no prompt per pair with both full role sets in
/// context. "No" and un-parseable verdicts are both findings, un-parseable
/// conservatively, since findings go to a human.
pub fn audit_matches(
    gateway: &Gateway,
    matches: &MatchSet,
    m_roles: &[CellText],
    l_roles: &[CellText],
) -> Result<AuditFindings> {
    let mut findings = AuditFindings::default();
    for pair in matches.pairs() {
        let slots: Slots = [
            ("left", SlotValue::text(&pair.left.raw)),
            ("right", SlotValue::text(&pair.right.raw)),
            ("left_roles", SlotValue::candidates(m_roles.iter().map(|r| r.raw.clone()))),
            ("right_roles", SlotValue::candidates(l_roles.iter().map(|r| r.raw.clone()))),
        ]
        .into_iter()
        .collect();
        let response = gateway.ask("role_pair_audit", &slots)?;
        match parse_yes_no(&response) {
            Verdict::Yes => {}
            Verdict::No => findings.suspect_pairs.push(SuspectPair {
                pair: pair.clone(),
                explanation: response.trim().to_string(),
            }),
            Verdict::Unparseable => findings.suspect_pairs.push(SuspectPair {
                pair: pair.clone(),
                explanation: format!("un-parseable verdict: {}", response.trim()),
            }),
        }
    }
    Ok(findings)
}

/// Equijoin of matrix and hierarchy list under the matching: each subject
/// gains the hierarchy annotations of all its matched rows. Both join
/// columns survive (the matrix role text and the list role text). No
/// subject or asset is ever dropped.
pub fn build_extended_matrix(
    matrix: &AccessMatrix,
    rhl: &RoleHierarchyList,
    matches: &MatchSet,
) -> Result<ExtendedAccessMatrix> {
    let mut annotations: Vec<Vec<HierarchyAnnotation>> = vec![Vec::new(); matrix.rows()];
    for (idx, subject) in matrix.subjects().iter().enumerate() {
        for right in matches.rights_for(&subject.raw) {
            for row in rhl.rows().iter().filter(|r| r.role.raw == right.raw) {
                annotations[idx].push(HierarchyAnnotation {
                    source_role: row.role.clone(),
                    parent: row.parent.clone(),
                    child: row.child.clone(),
                });
            }
        }
    }
    ExtendedAccessMatrix::new(matrix.clone(), annotations)
}

/// Outcome of resolving a parent/child description to a role label. A
/// description the gateway cannot map stays unresolved, never guessed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Resolution {
    Label(String),
    Unresolved { response: String },
}

impl Resolution {
    pub fn label(&self) -> Option<&str> {
        match self {
            Resolution::Label(label) => Some(label),
            Resolution::Unresolved { .. } => None,
        }
    }
}

/// Map a child description to one of the known role labels. Descriptions
/// already equal to a label bypass the gateway.
pub fn resolve_child(
    gateway: &Gateway,
    child_desc: &str,
    role_desc: &str,
    role_label: &str,
    labels: &[String],
) -> Result<Resolution> {
    resolve_related(gateway, "child_label", "child_description", child_desc, role_desc, role_label, labels)
}

/// Counterpart of [`resolve_child`] for parent descriptions.
pub fn resolve_parent(
    gateway: &Gateway,
    parent_desc: &str,
    role_desc: &str,
    role_label: &str,
    labels: &[String],
) -> Result<Resolution> {
    resolve_related(gateway, "parent_label", "parent_description", parent_desc, role_desc, role_label, labels)
}

fn resolve_related(
    gateway: &Gateway,
    template: &str,
    desc_slot: &'static str,
    desc: &str,
    role_desc: &str,
    role_label: &str,
    labels: &[String],
) -> Result<Resolution> {
    if labels.is_empty() {
        return Err(Error::Synthesis {
            context: template.to_string(),
            message: "label set is empty".into(),
        });
    }
    if let Some(exact) = labels.iter().find(|l| l.as_str() == desc) {
        return Ok(Resolution::Label(exact.clone()));
    }
    let slots: Slots = [
        ("role_label", SlotValue::text(role_label)),
        ("role_description", SlotValue::text(role_desc)),
        (desc_slot, SlotValue::text(desc)),
        ("list", SlotValue::candidates(labels.iter().cloned())),
    ]
    .into_iter()
    .collect();
    let response = gateway.ask(template, &slots)?;
    let label_refs: Vec<&str> = labels.iter().map(String::as_str).collect();
    let outcome = parse_choice(&response, &label_refs);
    Ok(match outcome.choice {
        Some(i) => Resolution::Label(labels[i].clone()),
        None => Resolution::Unresolved { response: response.trim().to_string() },
    })
}

/// Union of a role's own operators with everything reachable through
/// role -> child edges, by depth-first traversal with memoization.
pub fn privilege_closure(
    role: &str,
    edges: &[(String, String)],
    base: &BTreeMap<String, PrivilegeSet>,
) -> Result<PrivilegeSet> {
    let borrowed: Vec<(&str, &str)> = edges.iter().map(|(a, b)| (a.as_str(), b.as_str())).collect();
    if let Some(cycle) = detect_cycle(&borrowed) {
        return Err(Error::HierarchyCycle(cycle));
    }
    fn walk<'a>(
        role: &'a str,
        edges: &[(&'a str, &'a str)],
        base: &BTreeMap<String, PrivilegeSet>,
        memo: &mut BTreeMap<&'a str, PrivilegeSet>,
    ) -> PrivilegeSet {
        if let Some(done) = memo.get(role) {
            return *done;
        }
        let mut set = base.get(role).copied().unwrap_or(PrivilegeSet::EMPTY);
        for (from, to) in edges {
            if *from == role {
                set = set.union(walk(to, edges, base, memo));
            }
        }
        memo.insert(role, set);
        set
    }
    let mut memo: BTreeMap<&str, PrivilegeSet> = BTreeMap::new();
    Ok(walk(role, &borrowed, base, &mut memo))
}

/// Label-level view of the hierarchy carried by an extended matrix:
/// role-label -> child-label edges, plus the flags raised along the way.
#[derive(Debug, Clone, Default)]
pub struct ResolvedHierarchy {
    pub edges: Vec<(String, String)>,
    pub flags: Vec<String>,
}

/// Resolve every child annotation of the extended matrix to label-level
/// edges using the role-label map. Unresolvable children are flagged and
/// their subjects reported, so the rewrite can leave those grants alone.
pub fn resolve_hierarchy_edges(
    gateway: &Gateway,
    extended: &ExtendedAccessMatrix,
    role_labels: &BTreeMap<String, String>,
) -> Result<(ResolvedHierarchy, BTreeSet<String>)> {
    let labels: Vec<String> = role_labels.values().cloned().collect();
    let mut resolved = ResolvedHierarchy::default();
    let mut flagged_roles: BTreeSet<String> = BTreeSet::new();
    for (idx, subject) in extended.matrix.subjects().iter().enumerate() {
        let Some(role_label) = role_labels.get(&subject.raw) else { continue };
        for annotation in extended.annotations(idx) {
            let Some(child) = &annotation.child else { continue };
            match resolve_child(gateway, &child.raw, &subject.raw, role_label, &labels)? {
                Resolution::Label(child_label) => {
                    let edge = (role_label.clone(), child_label);
                    if !resolved.edges.contains(&edge) {
                        resolved.edges.push(edge);
                    }
                }
                Resolution::Unresolved { response } => {
                    resolved.flags.push(format!(
                        "child {:?} of role {:?} unresolved: {response}",
                        child.raw, subject.raw
                    ));
                    flagged_roles.insert(role_label.clone());
                }
            }
        }
    }
    Ok((resolved, flagged_roles))
}

/// Inheritance-aware script rewrite result.
#[derive(Debug, Clone)]
pub struct ApplyOutcome {
    pub script: SqlScript,
    /// Grants left unchanged because a child label was unresolved.
    pub flags: Vec<String>,
}

/// Rewrite grants for roles with children: emit `GRANT child TO role`
/// memberships plus a residual grant carrying exactly the operators the
/// children's closure does not already supply. Inherited operators are
/// never re-granted directly; roles without children keep their grants.
pub fn apply_inheritance(
    script: &SqlScript,
    hierarchy: &ResolvedHierarchy,
    flagged_subjects: &BTreeSet<String>,
) -> Result<ApplyOutcome> {
    // Direct grants per (role, asset) parsed back out of the script.
    let mut direct: BTreeMap<(String, String), PrivilegeSet> = BTreeMap::new();
    for stmt in script.statements() {
        if stmt.kind != StatementKind::Grant {
            continue;
        }
        let (role, asset, privs) = parse_grant_text(&stmt.text)?;
        let entry = direct.entry((role, asset)).or_default();
        *entry = entry.union(privs);
    }

    let children_of = |role: &str| -> Vec<&str> {
        hierarchy
            .edges
            .iter()
            .filter(|(from, _)| from == role)
            .map(|(_, to)| to.as_str())
            .collect()
    };

    let mut statements: Vec<ScriptStatement> = Vec::new();
    let mut flags = hierarchy.flags.clone();
    let mut membership_emitted: BTreeSet<(String, String)> = BTreeSet::new();

    for stmt in script.statements() {
        if stmt.kind != StatementKind::Grant {
            statements.push(stmt.clone());
            continue;
        }
        let (role, asset, privs) = parse_grant_text(&stmt.text)?;
        let kids = children_of(&role);
        if kids.is_empty() || flagged_subjects.contains(&role) {
            if flagged_subjects.contains(&role) && !kids.is_empty() {
                flags.push(format!("grant for {role:?} left unchanged: unresolved child label"));
            }
            statements.push(stmt.clone());
            continue;
        }
        // Closure of the children's direct grants on this asset.
        let base: BTreeMap<String, PrivilegeSet> = direct
            .iter()
            .filter(|((_, a), _)| *a == asset)
            .map(|((r, _), set)| (r.clone(), *set))
            .collect();
        let mut inherited = PrivilegeSet::EMPTY;
        for kid in &kids {
            inherited = inherited.union(privilege_closure(kid, &hierarchy.edges, &base)?);
        }
        for kid in &kids {
            if membership_emitted.insert((role.clone(), (*kid).to_string())) {
                statements.push(ScriptStatement::new(
                    StatementKind::GrantRole,
                    format!("GRANT {kid} TO {role};"),
                ));
            }
        }
        let residual = privs.difference(inherited);
        if !residual.is_empty() {
            let mut replacement =
                ScriptStatement::new(StatementKind::Grant, grant_statement(&role, &asset, residual)?);
            replacement.provenance = stmt.provenance;
            statements.push(replacement);
        }
    }

    Ok(ApplyOutcome { script: SqlScript::new(statements)?, flags })
}

/// Parse `(role, asset, operators)` back out of a grant statement, folding
/// `WITH GRANT OPTION` into the operator set.
pub fn parse_grant_text(text: &str) -> Result<(String, String, PrivilegeSet)> {
    use crate::acm::Operator;
    use sqlparser::ast::{GrantObjects, Privileges, Statement};
    match parse_single(text, "grant")? {
        Statement::Grant { privileges, objects, grantees, with_grant_option, .. } => {
            let mut ops: Vec<Operator> = match &privileges {
                Privileges::Actions(actions) => {
                    actions.iter().filter_map(|a| Operator::parse(&a.to_string())).collect()
                }
                Privileges::All { .. } => vec![
                    Operator::Select,
                    Operator::Insert,
                    Operator::Update,
                    Operator::Delete,
                    Operator::Create,
                ],
            };
            if with_grant_option {
                ops.push(Operator::Grant);
            }
            let asset = match objects {
                GrantObjects::Tables(names) => {
                    names.first().map(|n| n.to_string()).ok_or_else(|| Error::SqlParse {
                        context: "grant".into(),
                        message: "no granted object".into(),
                    })?
                }
                other => {
                    return Err(Error::SqlParse {
                        context: "grant".into(),
                        message: format!("unsupported grant object class: {other}"),
                    })
                }
            };
            let role = grantees.first().map(|g| g.to_string()).ok_or_else(|| Error::SqlParse {
                context: "grant".into(),
                message: "no grantee".into(),
            })?;
            Ok((role, asset, ops.into_iter().collect()))
        }
        _ => Err(Error::SqlParse { context: "grant".into(), message: "not a GRANT".into() }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::acm::{HierarchyRow, Operator};

    fn cells(texts: &[&str]) -> Vec<CellText> {
        texts.iter().map(|t| CellText::new(*t)).collect()
    }

    #[test]
    fn identical_singletons_match_and_consume() {
        let gw = Gateway::oracle(|template, _| {
            (template == "role_subset_match").then(|| "CEO".to_string())
        });
        let out = bipartite_match(&gw, &cells(&["CEO"]), &cells(&["CEO"])).unwrap();
        assert_eq!(out.matches.pairs().len(), 1);
        assert!(out.resume_at.is_none());
    }

    #[test]
    fn over_selection_records_both_pairs() {
        let gw = Gateway::oracle(|template, prompt| {
            if template != "role_subset_match" {
                return None;
            }
            if prompt.contains("CEO") {
                Some("Both Chief Executive Officer and Managing Director fit.".to_string())
            } else {
                Some("none".to_string())
            }
        });
        let out = bipartite_match(
            &gw,
            &cells(&["CEO", "Accountant"]),
            &cells(&["Chief Executive Officer", "Managing Director", "Bookkeeper"]),
        )
        .unwrap();
        let ceo_rights: Vec<&CellText> = out.matches.rights_for("CEO").collect();
        assert_eq!(ceo_rights.len(), 2);
    }

    #[test]
    fn consumed_rights_never_reappear() {
        // Both lefts would claim the same right; the second left sees a
        // reduced candidate list, so right-uniqueness holds by construction.
        let gw = Gateway::oracle(|template, _| {
            (template == "role_subset_match").then(|| "Engineer".to_string())
        });
        let out = bipartite_match(
            &gw,
            &cells(&["Software Engineer", "Systems Engineer"]),
            &cells(&["Engineer", "Clerk"]),
        )
        .unwrap();
        assert_eq!(out.matches.pairs().len(), 1);
        assert_eq!(out.matches.pairs()[0].left.raw, "Software Engineer");
    }

    #[test]
    fn gateway_failure_returns_partial_with_cursor() {
        let gw = Gateway::oracle(|template, prompt| {
            if template != "role_subset_match" {
                return None;
            }
            prompt.contains("first role").then(|| "alpha".to_string())
        });
        let out =
            bipartite_match(&gw, &cells(&["first role", "second role"]), &cells(&["alpha", "beta"]))
                .unwrap();
        assert_eq!(out.matches.pairs().len(), 1);
        assert_eq!(out.resume_at, Some(1));
        assert!(out.error.is_some());
    }

    #[test]
    fn audit_collects_no_and_unparseable() {
        let gw = Gateway::oracle(|template, prompt| {
            if template != "role_pair_audit" {
                return None;
            }
            // Key on the pair slot at the start, not the candidate lists
            // that appear in every prompt.
            if prompt.contains("role: identical,") {
                Some("Yes.".to_string())
            } else if prompt.contains("role: vague role,") {
                Some("Perhaps.".to_string())
            } else {
                Some("No, these differ.".to_string())
            }
        });
        let matches = MatchSet::new(vec![
            MatchPair {
                left: CellText::new("identical"),
                right: CellText::new("identical twin"),
                explanation: String::new(),
            },
            MatchPair {
                left: CellText::new("vague role"),
                right: CellText::new("hazy role"),
                explanation: String::new(),
            },
            MatchPair {
                left: CellText::new("project lead"),
                right: CellText::new("janitor"),
                explanation: String::new(),
            },
        ])
        .unwrap();
        let m = cells(&["identical", "vague role", "project lead"]);
        let l = cells(&["identical twin", "hazy role", "janitor"]);
        let findings = audit_matches(&gw, &matches, &m, &l).unwrap();
        assert_eq!(findings.suspect_pairs.len(), 2);
        assert!(findings.suspect_pairs[0].explanation.contains("un-parseable"));
    }

    #[test]
    fn extended_join_attaches_matched_rows() {
        let matrix =
            AccessMatrix::from_raw(vec!["the chief executive"], vec!["t"], vec![vec!["SELECT"]])
                .unwrap();
        let rhl = RoleHierarchyList::new(vec![
            HierarchyRow {
                role: CellText::new("CEO"),
                parent: None,
                child: Some(CellText::new("CTO")),
            },
            HierarchyRow {
                role: CellText::new("CEO"),
                parent: None,
                child: Some(CellText::new("CFO")),
            },
        ])
        .unwrap();
        let matches = MatchSet::new(vec![MatchPair {
            left: CellText::new("the chief executive"),
            right: CellText::new("CEO"),
            explanation: String::new(),
        }])
        .unwrap();
        let extended = build_extended_matrix(&matrix, &rhl, &matches).unwrap();
        assert_eq!(extended.annotations(0).len(), 2);
        assert_eq!(extended.matrix.rows(), matrix.rows());

        // Empty matching leaves a bare annex.
        let empty = build_extended_matrix(&matrix, &rhl, &MatchSet::default()).unwrap();
        assert!(empty.annotations(0).is_empty());
    }

    #[test]
    fn resolution_exact_label_bypasses_gateway() {
        let gw = Gateway::oracle(|_, _| None);
        let labels = vec!["intern".to_string(), "manager".to_string()];
        let res = resolve_child(&gw, "intern", "the manager", "manager", &labels).unwrap();
        assert_eq!(res, Resolution::Label("intern".into()));
        assert_eq!(gw.call_count(), 0);
    }

    #[test]
    fn resolution_outside_label_set_stays_unresolved() {
        let gw = Gateway::oracle(|template, _| {
            (template == "child_label").then(|| "some_invented_role".to_string())
        });
        let labels = vec!["intern".to_string(), "manager".to_string()];
        let res = resolve_child(&gw, "a junior helper", "the manager", "manager", &labels).unwrap();
        assert!(matches!(res, Resolution::Unresolved { .. }));
    }

    #[test]
    fn parent_resolution_uses_fixture() {
        let gw = Gateway::oracle(|template, _| {
            (template == "parent_label").then(|| "manager — supervises this role".to_string())
        });
        let labels = vec!["intern".to_string(), "manager".to_string()];
        let res = resolve_parent(&gw, "the supervisor", "an intern", "intern", &labels).unwrap();
        assert_eq!(res, Resolution::Label("manager".into()));
    }

    #[test]
    fn closure_on_chain_unions_all() {
        let edges = vec![("r".to_string(), "c".to_string()), ("c".to_string(), "g".to_string())];
        let base: BTreeMap<String, PrivilegeSet> = [
            ("r".to_string(), PrivilegeSet::new([Operator::Select]).unwrap()),
            ("c".to_string(), PrivilegeSet::new([Operator::Insert]).unwrap()),
            ("g".to_string(), PrivilegeSet::new([Operator::Delete]).unwrap()),
        ]
        .into_iter()
        .collect();
        let closure = privilege_closure("r", &edges, &base).unwrap();
        assert_eq!(closure.render(), "SELECT, INSERT, DELETE");
        // Leaf is untouched.
        assert_eq!(privilege_closure("g", &edges, &base).unwrap().render(), "DELETE");
    }

    #[test]
    fn closure_is_monotone_in_edges() {
        let base: BTreeMap<String, PrivilegeSet> = [
            ("r".to_string(), PrivilegeSet::new([Operator::Select]).unwrap()),
            ("c".to_string(), PrivilegeSet::new([Operator::Update]).unwrap()),
        ]
        .into_iter()
        .collect();
        let without = privilege_closure("r", &[], &base).unwrap();
        let with =
            privilege_closure("r", &[("r".to_string(), "c".to_string())], &base).unwrap();
        assert!(without.is_subset(with));
    }

    #[test]
    fn closure_cycle_is_named() {
        let edges = vec![("a".to_string(), "b".to_string()), ("b".to_string(), "a".to_string())];
        let err = privilege_closure("a", &edges, &BTreeMap::new()).unwrap_err();
        match err {
            Error::HierarchyCycle(path) => assert!(path.contains('a') && path.contains('b')),
            other => panic!("unexpected: {other}"),
        }
    }

    fn script_with_grants(grants: &[(&str, &str, &[Operator])]) -> SqlScript {
        let mut statements = Vec::new();
        for (role, _, _) in grants {
            let text = format!("CREATE ROLE {role};");
            if !statements.iter().any(|s: &ScriptStatement| s.text == text) {
                statements.push(ScriptStatement::new(StatementKind::CreateRole, text));
            }
        }
        for (i, (role, asset, ops)) in grants.iter().enumerate() {
            let privs = PrivilegeSet::new(ops.iter().copied()).unwrap();
            statements.push(ScriptStatement::with_provenance(
                StatementKind::Grant,
                grant_statement(role, asset, privs).unwrap(),
                (i, 0),
            ));
        }
        SqlScript::new(statements).unwrap()
    }

    #[test]
    fn no_children_leaves_script_unchanged() {
        let script = script_with_grants(&[("solo", "v", &[Operator::Select])]);
        let hierarchy = ResolvedHierarchy::default();
        let out = apply_inheritance(&script, &hierarchy, &BTreeSet::new()).unwrap();
        assert_eq!(out.script, script);
    }

    #[test]
    fn residual_grant_carries_only_uninherited_operators() {
        let script = script_with_grants(&[
            ("child", "v", &[Operator::Select]),
            ("role", "v", &[Operator::Select, Operator::Update]),
        ]);
        let hierarchy = ResolvedHierarchy {
            edges: vec![("role".to_string(), "child".to_string())],
            flags: vec![],
        };
        let out = apply_inheritance(&script, &hierarchy, &BTreeSet::new()).unwrap();
        let texts: Vec<&str> = out.script.statements().iter().map(|s| s.text.as_str()).collect();
        assert!(texts.contains(&"GRANT child TO role;"));
        assert!(texts.contains(&"GRANT UPDATE ON v TO role;"));
        assert!(!texts.iter().any(|t| t.contains("GRANT SELECT, UPDATE ON v TO role")));
    }

    #[test]
    fn exact_child_closure_leaves_no_residual() {
        let script = script_with_grants(&[
            ("child", "v", &[Operator::Select]),
            ("role", "v", &[Operator::Select]),
        ]);
        let hierarchy = ResolvedHierarchy {
            edges: vec![("role".to_string(), "child".to_string())],
            flags: vec![],
        };
        let out = apply_inheritance(&script, &hierarchy, &BTreeSet::new()).unwrap();
        let texts: Vec<&str> = out.script.statements().iter().map(|s| s.text.as_str()).collect();
        assert!(texts.contains(&"GRANT child TO role;"));
        assert!(!texts.iter().any(|t| t.contains("ON v TO role")));
    }

    #[test]
    fn flagged_subject_keeps_original_grant() {
        let script = script_with_grants(&[
            ("child", "v", &[Operator::Select]),
            ("role", "v", &[Operator::Select, Operator::Update]),
        ]);
        let hierarchy = ResolvedHierarchy {
            edges: vec![("role".to_string(), "child".to_string())],
            flags: vec![],
        };
        let flagged: BTreeSet<String> = ["role".to_string()].into_iter().collect();
        let out = apply_inheritance(&script, &hierarchy, &flagged).unwrap();
        let texts: Vec<&str> = out.script.statements().iter().map(|s| s.text.as_str()).collect();
        assert!(texts.contains(&"GRANT SELECT, UPDATE ON v TO role;"));
        assert!(!out.flags.is_empty());
    }
}
