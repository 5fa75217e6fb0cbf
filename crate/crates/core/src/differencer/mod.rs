//! Strict-inequality differencing of two access matrices.
//!
//! The first matrix states the policy, the second the implementation (or a
//! second policy). Subjects and assets of the second matrix that nothing in
//! the first maps to are violations outright, under failsafe defaults; for
//! matched pairs, implementation privileges must be subsumed by policy. The
//! report is exhaustive: auditors get the full list, never a first-failure
//! short circuit.

use serde::{Deserialize, Serialize};

use crate::acm::{
    extract_literals, normalize_literal, AccessMatrix, CellText, ExtendedAccessMatrix,
    ParsedPrivileges, PrivilegeCell,
};
use crate::catalog::CatalogTarget;
use crate::error::Result;
use crate::gateway::{parse_choice, parse_yes_no, Gateway, SlotValue, Slots, Verdict};
use crate::synthesizer::parse_single;

/// What a mapped pair's privileges looked like under subsumption.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum SubsumptionVerdict {
    Subsumed,
    /// Implementation grants these operators beyond policy.
    Violation { operators: String },
    /// Cells were not plain operator lists; the gateway judged "exceeds".
    OpaqueViolation { explanation: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrivilegeViolation {
    pub subject: String,
    pub asset: String,
    /// Canonical operator list when the violation is set-differencing,
    /// absent for opaque verdicts.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub offending_operators: Option<String>,
    pub explanation: String,
}

/// One mapping decision, kept for the audit trail.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchTraceEntry {
    /// "role" or "view".
    pub item_kind: String,
    pub left: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub right: Option<String>,
    pub explanation: String,
    /// Candidates removed by literal pruning before any prompt was spent.
    pub pruned_candidates_count: usize,
}

/// Differencing output.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ViolationReport {
    pub extra_subjects: Vec<String>,
    pub extra_assets: Vec<String>,
    pub privilege_violations: Vec<PrivilegeViolation>,
    pub inheritance_missing: Vec<(String, String)>,
    pub inheritance_extra: Vec<(String, String)>,
    pub match_trace: Vec<MatchTraceEntry>,
}

impl ViolationReport {
    /// Compliant iff no violations of any class. The match trace is
    /// diagnostics, not a violation.
    pub fn is_empty(&self) -> bool {
        self.extra_subjects.is_empty()
            && self.extra_assets.is_empty()
            && self.privilege_violations.is_empty()
            && self.inheritance_missing.is_empty()
            && self.inheritance_extra.is_empty()
    }

    /// Granular violation count, used by monotonicity checks.
    pub fn entry_count(&self) -> usize {
        let operator_entries: usize = self
            .privilege_violations
            .iter()
            .map(|v| {
                v.offending_operators
                    .as_ref()
                    .map(|ops| ops.split(',').count())
                    .unwrap_or(1)
            })
            .sum();
        self.extra_subjects.len()
            + self.extra_assets.len()
            + operator_entries
            + self.inheritance_missing.len()
            + self.inheritance_extra.len()
    }

    /// Human-readable rendering.
    pub fn render(&self) -> String {
        if self.is_empty() {
            return "compliant: no violations found\n".to_string();
        }
        let mut out = String::new();
        for s in &self.extra_subjects {
            out.push_str(&format!("extra subject: {s}\n"));
        }
        for a in &self.extra_assets {
            out.push_str(&format!("extra asset: {a}\n"));
        }
        for v in &self.privilege_violations {
            match &v.offending_operators {
                Some(ops) => out.push_str(&format!(
                    "privilege violation: {} on {} grants [{}] beyond policy\n",
                    v.subject, v.asset, ops
                )),
                None => out.push_str(&format!(
                    "privilege violation: {} on {}: {}\n",
                    v.subject, v.asset, v.explanation
                )),
            }
        }
        for (role, child) in &self.inheritance_missing {
            out.push_str(&format!("inheritance missing: {role} -> {child}\n"));
        }
        for (role, child) in &self.inheritance_extra {
            out.push_str(&format!("inheritance extra: {role} -> {child}\n"));
        }
        out
    }
}

/// (role text, child text) pairs, as reported by hierarchy differencing.
pub type RoleChildPairs = Vec<(String, String)>;

/// Which header axis is being mapped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ItemKind {
    Role,
    View,
}

impl ItemKind {
    fn label(self) -> &'static str {
        match self {
            ItemKind::Role => "role",
            ItemKind::View => "view",
        }
    }

    fn nl_vs_nl_template(self) -> &'static str {
        match self {
            ItemKind::Role => "nl_vs_nl_role",
            ItemKind::View => "nl_vs_nl_view",
        }
    }

    fn nl_vs_sql_template(self) -> &'static str {
        match self {
            ItemKind::Role => "nl_vs_sql_role",
            ItemKind::View => "nl_vs_sql_view",
        }
    }
}

/// Mapping result: pairs of (left index, right index) plus the trace.
#[derive(Debug, Clone, Default)]
pub struct MapOutcome {
    pub pairs: Vec<(usize, usize)>,
    pub trace: Vec<MatchTraceEntry>,
}

impl MapOutcome {
    pub fn right_of(&self, left: usize) -> Option<usize> {
        self.pairs.iter().find(|(l, _)| *l == left).map(|(_, r)| *r)
    }

    pub fn matched_rights(&self) -> Vec<usize> {
        self.pairs.iter().map(|(_, r)| *r).collect()
    }
}

/// Keep only candidates whose extracted literals cover the item's literals,
/// up to case and underscore/space normalization. Items without literals
/// prune nothing. Returns surviving candidate indices.
pub fn prune_candidates(item: &CellText, candidates: &[&CellText]) -> Vec<usize> {
    let wanted: Vec<String> =
        extract_literals(&item.raw).iter().map(|l| normalize_literal(l)).collect();
    if wanted.is_empty() {
        return (0..candidates.len()).collect();
    }
    candidates
        .iter()
        .enumerate()
        .filter(|(_, c)| {
            let have: Vec<String> =
                extract_literals(&c.raw).iter().map(|l| normalize_literal(l)).collect();
            wanted.iter().all(|w| have.contains(w))
        })
        .map(|(i, _)| i)
        .collect()
}

pub struct Differencer<'a> {
    gateway: &'a Gateway,
    /// Sandbox for SQL-vs-SQL view equality by result-set comparison. When
    /// absent, canonical-text equality is the only SQL-vs-SQL view check.
    sandbox: Option<&'a dyn CatalogTarget>,
    /// Literal pruning on candidate sets. Disabling it reproduces the
    /// plain-prompting ablation, which spends strictly more calls.
    pruning: bool,
}

impl<'a> Differencer<'a> {
    pub fn new(gateway: &'a Gateway) -> Self {
        Differencer { gateway, sandbox: None, pruning: true }
    }

    pub fn with_sandbox(gateway: &'a Gateway, sandbox: &'a dyn CatalogTarget) -> Self {
        Differencer { gateway, sandbox: Some(sandbox), pruning: true }
    }

    pub fn without_pruning(mut self) -> Self {
        self.pruning = false;
        self
    }

    /// Nearest-neighbor-if-exists mapping of left items onto right items.
    /// Rights are claimed first-come: later lefts see a reduced candidate
    /// set. SQL-vs-SQL comparisons never touch the gateway.
    pub fn map_items(
        &self,
        left_items: &[CellText],
        right_items: &[CellText],
        kind: ItemKind,
    ) -> MapOutcome {
        let mut claimed = vec![false; right_items.len()];
        let mut out = MapOutcome::default();
        for (li, left) in left_items.iter().enumerate() {
            let available: Vec<usize> = (0..right_items.len()).filter(|i| !claimed[*i]).collect();
            let candidates: Vec<&CellText> = available.iter().map(|&i| &right_items[i]).collect();
            let kept = if self.pruning {
                prune_candidates(left, &candidates)
            } else {
                (0..candidates.len()).collect()
            };
            let pruned_away = candidates.len() - kept.len();
            let pool: Vec<usize> = kept.iter().map(|&k| available[k]).collect();
            if pool.is_empty() {
                out.trace.push(MatchTraceEntry {
                    item_kind: kind.label().into(),
                    left: left.raw.clone(),
                    right: None,
                    explanation: "no candidates survived pruning".into(),
                    pruned_candidates_count: pruned_away,
                });
                continue;
            }
            match self.match_one(left, &pool, right_items, kind) {
                Ok(Some((right_index, explanation))) => {
                    claimed[right_index] = true;
                    out.pairs.push((li, right_index));
                    out.trace.push(MatchTraceEntry {
                        item_kind: kind.label().into(),
                        left: left.raw.clone(),
                        right: Some(right_items[right_index].raw.clone()),
                        explanation,
                        pruned_candidates_count: pruned_away,
                    });
                }
                Ok(None) => {
                    out.trace.push(MatchTraceEntry {
                        item_kind: kind.label().into(),
                        left: left.raw.clone(),
                        right: None,
                        explanation: "no candidate matched".into(),
                        pruned_candidates_count: pruned_away,
                    });
                }
                Err(e) => {
                    out.trace.push(MatchTraceEntry {
                        item_kind: kind.label().into(),
                        left: left.raw.clone(),
                        right: None,
                        explanation: format!("gateway failure: {e}"),
                        pruned_candidates_count: pruned_away,
                    });
                }
            }
        }
        out
    }

    /// Match one left item against the pooled candidate indices. Same-kind
    /// comparison runs first (it is cheaper and more reliable), then
    /// cross-kind through the NL-vs-SQL prompt.
    fn match_one(
        &self,
        left: &CellText,
        pool: &[usize],
        right_items: &[CellText],
        kind: ItemKind,
    ) -> Result<Option<(usize, String)>> {
        let sql_pool: Vec<usize> =
            pool.iter().copied().filter(|&i| right_items[i].is_sql()).collect();
        let nl_pool: Vec<usize> =
            pool.iter().copied().filter(|&i| !right_items[i].is_sql()).collect();

        if left.is_sql() {
            // Deterministic same-kind pass.
            for &i in &sql_pool {
                if let Some(explanation) = self.sql_equal(left, &right_items[i], kind)? {
                    return Ok(Some((i, explanation)));
                }
            }
            if !nl_pool.is_empty() {
                return self.prompt_match(left, &nl_pool, right_items, kind.nl_vs_sql_template());
            }
            return Ok(None);
        }
        if !nl_pool.is_empty() {
            if let Some(hit) =
                self.prompt_match(left, &nl_pool, right_items, kind.nl_vs_nl_template())?
            {
                return Ok(Some(hit));
            }
        }
        if !sql_pool.is_empty() {
            return self.prompt_match(left, &sql_pool, right_items, kind.nl_vs_sql_template());
        }
        Ok(None)
    }

    fn prompt_match(
        &self,
        left: &CellText,
        pool: &[usize],
        right_items: &[CellText],
        template: &str,
    ) -> Result<Option<(usize, String)>> {
        // An exact duplicate is the nearest neighbor by definition; no call
        // is spent on it.
        if let Some(&i) = pool.iter().find(|&&i| right_items[i].raw.trim() == left.raw.trim()) {
            return Ok(Some((i, "exact text equality".into())));
        }
        let slots: Slots = [
            ("phrase", SlotValue::text(&left.raw)),
            ("list", SlotValue::candidates(pool.iter().map(|&i| right_items[i].raw.clone()))),
        ]
        .into_iter()
        .collect();
        let response = self.gateway.ask(template, &slots)?;
        let texts: Vec<&str> = pool.iter().map(|&i| right_items[i].raw.as_str()).collect();
        let outcome = parse_choice(&response, &texts);
        Ok(outcome.choice.map(|c| (pool[c], outcome.explanation)))
    }

    /// SQL-vs-SQL equality. Roles compare by label; views compare by
    /// canonical text, then by result sets on the sandbox when one is
    /// configured. Result-set equality is logged with the instance-
    /// coincidence caveat: equal rows on this instance do not prove equal
    /// definitions.
    fn sql_equal(&self, left: &CellText, right: &CellText, kind: ItemKind) -> Result<Option<String>> {
        if kind == ItemKind::Role {
            return Ok((left.raw.trim() == right.raw.trim())
                .then(|| "exact label comparison".to_string()));
        }
        if canonical_sql(&left.raw) == canonical_sql(&right.raw) {
            return Ok(Some("canonical text equality".to_string()));
        }
        if let Some(sandbox) = self.sandbox {
            if let (Some(lq), Some(rq)) = (view_query(&left.raw), view_query(&right.raw)) {
                let mut lrows = sandbox.query_rows(&lq)?;
                let mut rrows = sandbox.query_rows(&rq)?;
                lrows.sort();
                rrows.sort();
                if lrows == rrows {
                    return Ok(Some(
                        "result sets equal on sandbox instance (instance coincidence caveat)"
                            .to_string(),
                    ));
                }
            }
        }
        Ok(None)
    }

    /// Subsumption for one matched (subject, asset) pair. Parsed operator
    /// lists compare as sets; anything else is one yes/no prompt, with
    /// un-parseable verdicts conservatively treated as violations.
    pub fn subsumption(
        &self,
        policy_cell: &PrivilegeCell,
        impl_cell: &PrivilegeCell,
    ) -> Result<SubsumptionVerdict> {
        if impl_cell.is_empty() {
            return Ok(SubsumptionVerdict::Subsumed);
        }
        if let (ParsedPrivileges::Set(policy), ParsedPrivileges::Set(implementation)) =
            (policy_cell.parse(), impl_cell.parse())
        {
            return Ok(if implementation.is_subset(policy) {
                SubsumptionVerdict::Subsumed
            } else {
                SubsumptionVerdict::Violation {
                    operators: implementation.difference(policy).render(),
                }
            });
        }
        let slots: Slots = [
            ("policy", SlotValue::text(policy_cell.raw())),
            ("implementation", SlotValue::text(impl_cell.raw())),
        ]
        .into_iter()
        .collect();
        let response = self.gateway.ask("privilege_exceeds", &slots)?;
        Ok(match parse_yes_no(&response) {
            Verdict::Yes => SubsumptionVerdict::OpaqueViolation { explanation: response.trim().into() },
            Verdict::No => SubsumptionVerdict::Subsumed,
            Verdict::Unparseable => SubsumptionVerdict::OpaqueViolation {
                explanation: format!("un-parseable verdict: {}", response.trim()),
            },
        })
    }

    /// Full differencing pass: map subjects and assets, list the unmatched
    /// second-matrix headers as extras, then run subsumption over every
    /// matched pair granted anything in the second matrix.
    pub fn diff(&self, policy: &AccessMatrix, implementation: &AccessMatrix) -> Result<ViolationReport> {
        self.diff_inner(policy, implementation).map(|(report, _)| report)
    }

    /// Differencing over extended matrices: the matrix pass plus hierarchy
    /// differencing over the subject matching it computed.
    pub fn diff_extended(
        &self,
        policy: &ExtendedAccessMatrix,
        implementation: &ExtendedAccessMatrix,
    ) -> Result<ViolationReport> {
        let (mut report, subject_pairs) = self.diff_inner(&policy.matrix, &implementation.matrix)?;
        let (missing, extra) = self.diff_hierarchy(policy, implementation, &subject_pairs)?;
        report.inheritance_missing = missing;
        report.inheritance_extra = extra;
        Ok(report)
    }

    fn diff_inner(
        &self,
        policy: &AccessMatrix,
        implementation: &AccessMatrix,
    ) -> Result<(ViolationReport, Vec<(usize, usize)>)> {
        let subject_map = self.map_items(policy.subjects(), implementation.subjects(), ItemKind::Role);
        let asset_map = self.map_items(policy.assets(), implementation.assets(), ItemKind::View);

        let mut report = ViolationReport::default();
        let matched_subjects = subject_map.matched_rights();
        let matched_assets = asset_map.matched_rights();
        for (i, subject) in implementation.subjects().iter().enumerate() {
            if !matched_subjects.contains(&i) {
                report.extra_subjects.push(subject.raw.clone());
            }
        }
        for (j, asset) in implementation.assets().iter().enumerate() {
            if !matched_assets.contains(&j) {
                report.extra_assets.push(asset.raw.clone());
            }
        }

        for &(pi, ii) in &subject_map.pairs {
            for &(pj, ij) in &asset_map.pairs {
                let impl_cell = implementation.cell(ii, ij);
                if impl_cell.is_empty() {
                    continue;
                }
                let policy_cell = policy.cell(pi, pj);
                match self.subsumption(policy_cell, impl_cell)? {
                    SubsumptionVerdict::Subsumed => {}
                    SubsumptionVerdict::Violation { operators } => {
                        report.privilege_violations.push(PrivilegeViolation {
                            subject: policy.subjects()[pi].raw.clone(),
                            asset: policy.assets()[pj].raw.clone(),
                            offending_operators: Some(operators),
                            explanation: "implementation operators exceed policy".into(),
                        });
                    }
                    SubsumptionVerdict::OpaqueViolation { explanation } => {
                        report.privilege_violations.push(PrivilegeViolation {
                            subject: policy.subjects()[pi].raw.clone(),
                            asset: policy.assets()[pj].raw.clone(),
                            offending_operators: None,
                            explanation,
                        });
                    }
                }
            }
        }

        report.match_trace.extend(subject_map.trace);
        report.match_trace.extend(asset_map.trace);
        Ok((report, subject_map.pairs))
    }

    /// Hierarchy differencing over matched subjects: role-child pairs in the
    /// first matrix with no counterpart in the second are missing, and vice
    /// versa extra. Pairs under unmatched subjects are emitted wholesale.
    pub fn diff_hierarchy(
        &self,
        policy: &ExtendedAccessMatrix,
        implementation: &ExtendedAccessMatrix,
        subject_pairs: &[(usize, usize)],
    ) -> Result<(RoleChildPairs, RoleChildPairs)> {
        let mut missing = Vec::new();
        let mut extra = Vec::new();

        let matched_left: Vec<usize> = subject_pairs.iter().map(|(l, _)| *l).collect();
        let matched_right: Vec<usize> = subject_pairs.iter().map(|(_, r)| *r).collect();

        for &(li, ri) in subject_pairs {
            let left_children: Vec<&CellText> =
                policy.annotations(li).iter().filter_map(|a| a.child.as_ref()).collect();
            let right_children: Vec<&CellText> = implementation
                .annotations(ri)
                .iter()
                .filter_map(|a| a.child.as_ref())
                .collect();
            let mut claimed = vec![false; right_children.len()];
            for lc in &left_children {
                let mut hit = None;
                for (k, rc) in right_children.iter().enumerate() {
                    if claimed[k] {
                        continue;
                    }
                    if self.children_equal(lc, rc)? {
                        hit = Some(k);
                        break;
                    }
                }
                match hit {
                    Some(k) => claimed[k] = true,
                    None => missing.push((
                        policy.matrix.subjects()[li].raw.clone(),
                        lc.raw.clone(),
                    )),
                }
            }
            for (k, rc) in right_children.iter().enumerate() {
                if !claimed[k] {
                    extra.push((
                        implementation.matrix.subjects()[ri].raw.clone(),
                        rc.raw.clone(),
                    ));
                }
            }
        }

        for (li, subject) in policy.matrix.subjects().iter().enumerate() {
            if matched_left.contains(&li) {
                continue;
            }
            for annotation in policy.annotations(li) {
                if let Some(child) = &annotation.child {
                    missing.push((subject.raw.clone(), child.raw.clone()));
                }
            }
        }
        for (ri, subject) in implementation.matrix.subjects().iter().enumerate() {
            if matched_right.contains(&ri) {
                continue;
            }
            for annotation in implementation.annotations(ri) {
                if let Some(child) = &annotation.child {
                    extra.push((subject.raw.clone(), child.raw.clone()));
                }
            }
        }
        Ok((missing, extra))
    }

    fn children_equal(&self, left: &CellText, right: &CellText) -> Result<bool> {
        if left.is_sql() && right.is_sql() {
            return Ok(left.raw.trim() == right.raw.trim());
        }
        if left.raw.trim() == right.raw.trim() {
            return Ok(true);
        }
        let template = if left.is_sql() || right.is_sql() {
            "nl_vs_sql_role"
        } else {
            "nl_vs_nl_role"
        };
        let slots: Slots = [
            ("phrase", SlotValue::text(&left.raw)),
            ("list", SlotValue::candidates([right.raw.clone()])),
        ]
        .into_iter()
        .collect();
        let response = self.gateway.ask(template, &slots)?;
        Ok(parse_choice(&response, &[right.raw.as_str()]).choice.is_some())
    }
}

/// Canonical SQL text: parse and re-render when possible, else trimmed raw.
fn canonical_sql(text: &str) -> String {
    parse_single(text, "canonicalize")
        .map(|stmt| stmt.to_string())
        .unwrap_or_else(|_| text.trim().to_string())
}

/// The SELECT behind a view definition or bare query, for execution-based
/// comparison.
fn view_query(text: &str) -> Option<String> {
    use sqlparser::ast::Statement;
    match parse_single(text, "view query") {
        Ok(Statement::CreateView { query, .. }) => Some(query.to_string()),
        Ok(Statement::Query(q)) => Some(q.to_string()),
        _ => None,
    }
}
