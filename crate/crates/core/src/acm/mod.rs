//! Access-matrix data model: cell text with NL/SQL classification, privilege
//! sets, the subjects x assets grid, role-hierarchy lists, and the extended
//! matrix produced by joining the two.
//!
//! All types are immutable value objects after construction; mutation happens
//! by building new values.

mod io;
mod text;

pub use io::{
    load_matrix_csv, load_matrix_json, load_rhl_csv, load_rhl_json, save_matrix_json,
    MatrixDocument,
};
pub use text::{classify_text, extract_literals, normalize_literal};

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Whether a descriptor is natural language or SQL.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum TextKind {
    NL,
    SQL,
}

/// A role, asset, or privilege descriptor together with its NL/SQL tag.
///
/// The tag defaults to [`classify_text`] but loaders may override it, so an
/// implementation-side matrix can mark bare role labels as SQL.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CellText {
    pub raw: String,
    pub kind: TextKind,
}

impl CellText {
    /// Build with the kind inferred by [`classify_text`].
    pub fn new(raw: impl Into<String>) -> Self {
        let raw = raw.into();
        let kind = classify_text(&raw);
        CellText { raw, kind }
    }

    pub fn with_kind(raw: impl Into<String>, kind: TextKind) -> Self {
        CellText { raw: raw.into(), kind }
    }

    pub fn sql(raw: impl Into<String>) -> Self {
        Self::with_kind(raw, TextKind::SQL)
    }

    pub fn nl(raw: impl Into<String>) -> Self {
        Self::with_kind(raw, TextKind::NL)
    }

    pub fn is_sql(&self) -> bool {
        self.kind == TextKind::SQL
    }
}

impl fmt::Display for CellText {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.raw)
    }
}

/// The canonical SQL operators a privilege cell may grant.
///
/// `Grant` encodes the grant option: delegation of the other listed
/// operators, rendered as `WITH GRANT OPTION`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Operator {
    Select,
    Insert,
    Update,
    Delete,
    Create,
    Grant,
}

impl Operator {
    pub const ALL: [Operator; 6] = [
        Operator::Select,
        Operator::Insert,
        Operator::Update,
        Operator::Delete,
        Operator::Create,
        Operator::Grant,
    ];

    pub fn keyword(self) -> &'static str {
        match self {
            Operator::Select => "SELECT",
            Operator::Insert => "INSERT",
            Operator::Update => "UPDATE",
            Operator::Delete => "DELETE",
            Operator::Create => "CREATE",
            Operator::Grant => "GRANT",
        }
    }

    pub fn parse(token: &str) -> Option<Operator> {
        let token = token.trim();
        Operator::ALL
            .into_iter()
            .find(|op| op.keyword().eq_ignore_ascii_case(token))
    }

    fn bit(self) -> u8 {
        match self {
            Operator::Select => 1,
            Operator::Insert => 1 << 1,
            Operator::Update => 1 << 2,
            Operator::Delete => 1 << 3,
            Operator::Create => 1 << 4,
            Operator::Grant => 1 << 5,
        }
    }
}

/// A subset of the six canonical operators, stored as a bitset.
///
/// Invariant: `Grant` never appears alone, since delegating nothing is rejected
/// at construction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct PrivilegeSet(u8);

impl PrivilegeSet {
    pub const EMPTY: PrivilegeSet = PrivilegeSet(0);

    pub fn new(operators: impl IntoIterator<Item = Operator>) -> Result<Self> {
        let mut bits = 0u8;
        for op in operators {
            bits |= op.bit();
        }
        let set = PrivilegeSet(bits);
        if set.contains(Operator::Grant) && set.len() == 1 {
            return Err(Error::GrantAlone);
        }
        Ok(set)
    }

    /// All 64 subsets of the operator universe, including invalid `{GRANT}`.
    /// Useful for exhaustive lattice checks.
    pub fn universe() -> impl Iterator<Item = PrivilegeSet> {
        (0u8..64).map(PrivilegeSet)
    }

    pub fn contains(self, op: Operator) -> bool {
        self.0 & op.bit() != 0
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn union(self, other: PrivilegeSet) -> PrivilegeSet {
        PrivilegeSet(self.0 | other.0)
    }

    pub fn difference(self, other: PrivilegeSet) -> PrivilegeSet {
        PrivilegeSet(self.0 & !other.0)
    }

    pub fn is_subset(self, other: PrivilegeSet) -> bool {
        self.0 & !other.0 == 0
    }

    /// Operators in canonical order.
    pub fn iter(self) -> impl Iterator<Item = Operator> {
        Operator::ALL.into_iter().filter(move |op| self.contains(*op))
    }

    /// Canonical comma-joined rendering, e.g. `"SELECT, INSERT, GRANT"`.
    pub fn render(self) -> String {
        self.iter().map(Operator::keyword).collect::<Vec<_>>().join(", ")
    }
}

impl fmt::Display for PrivilegeSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

impl FromIterator<Operator> for PrivilegeSet {
    /// Collects ignoring the grant-alone check; prefer [`PrivilegeSet::new`]
    /// where the invariant must be enforced.
    fn from_iter<T: IntoIterator<Item = Operator>>(iter: T) -> Self {
        let mut bits = 0u8;
        for op in iter {
            bits |= op.bit();
        }
        PrivilegeSet(bits)
    }
}

/// Result of the deterministic fast path over a privilege cell.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParsedPrivileges {
    Set(PrivilegeSet),
    /// Not a plain operator list; defer to prompt-based subsumption.
    Opaque,
}

/// Deterministic fast path: parse a cell that is a comma/whitespace-separated
/// list drawn solely from the canonical operators. The literal phrase
/// `WITH GRANT OPTION` maps to `GRANT`. Anything else is `Opaque`.
pub fn parse_privileges(cell: &str) -> ParsedPrivileges {
    let mut text = cell.trim().to_string();
    if text.is_empty() {
        return ParsedPrivileges::Set(PrivilegeSet::EMPTY);
    }
    let mut ops: Vec<Operator> = Vec::new();
    // Replace the grant-option phrase before tokenizing so its WITH/OPTION
    // words do not read as unknown tokens.
    let lowered = text.to_ascii_lowercase();
    if let Some(pos) = lowered.find("with grant option") {
        text.replace_range(pos..pos + "with grant option".len(), "");
        ops.push(Operator::Grant);
    }
    for token in text.split(|c: char| c == ',' || c.is_whitespace()) {
        let token = token.trim_matches(|c: char| c == '.' || c == ';' || c == ':');
        if token.is_empty() {
            continue;
        }
        match Operator::parse(token) {
            Some(op) => ops.push(op),
            None => return ParsedPrivileges::Opaque,
        }
    }
    match PrivilegeSet::new(ops) {
        Ok(set) => ParsedPrivileges::Set(set),
        // A bare "GRANT" cell delegates nothing we can name; leave it to the
        // prompt path rather than fabricating a set.
        Err(_) => ParsedPrivileges::Opaque,
    }
}

/// One privilege cell: empty means no privilege is assigned.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrivilegeCell {
    pub text: Option<CellText>,
}

impl PrivilegeCell {
    pub fn empty() -> Self {
        PrivilegeCell { text: None }
    }

    pub fn new(raw: impl Into<String>) -> Self {
        let raw = raw.into();
        if raw.trim().is_empty() {
            PrivilegeCell { text: None }
        } else {
            PrivilegeCell { text: Some(CellText::new(raw)) }
        }
    }

    pub fn is_empty(&self) -> bool {
        self.text.is_none()
    }

    pub fn raw(&self) -> &str {
        self.text.as_ref().map(|t| t.raw.as_str()).unwrap_or("")
    }

    /// Fast-path parse of the cell content.
    pub fn parse(&self) -> ParsedPrivileges {
        parse_privileges(self.raw())
    }
}

/// The subjects x assets access matrix.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AccessMatrix {
    subjects: Vec<CellText>,
    assets: Vec<CellText>,
    cells: Vec<Vec<PrivilegeCell>>,
}

impl AccessMatrix {
    pub fn new(
        subjects: Vec<CellText>,
        assets: Vec<CellText>,
        cells: Vec<Vec<PrivilegeCell>>,
    ) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for s in &subjects {
            if s.raw.trim().is_empty() {
                return Err(Error::EmptyDescriptor("subject"));
            }
            if !seen.insert(s.raw.as_str()) {
                return Err(Error::DuplicateSubject(s.raw.clone()));
            }
        }
        seen.clear();
        for a in &assets {
            if a.raw.trim().is_empty() {
                return Err(Error::EmptyDescriptor("asset"));
            }
            if !seen.insert(a.raw.as_str()) {
                return Err(Error::DuplicateAsset(a.raw.clone()));
            }
        }
        if cells.len() != subjects.len() {
            return Err(Error::RaggedGrid { row: cells.len(), got: cells.len(), expected: subjects.len() });
        }
        for (row, r) in cells.iter().enumerate() {
            if r.len() != assets.len() {
                return Err(Error::RaggedGrid { row, got: r.len(), expected: assets.len() });
            }
        }
        Ok(AccessMatrix { subjects, assets, cells })
    }

    /// Convenience constructor from raw strings; kinds inferred.
    pub fn from_raw(
        subjects: Vec<&str>,
        assets: Vec<&str>,
        cells: Vec<Vec<&str>>,
    ) -> Result<Self> {
        AccessMatrix::new(
            subjects.into_iter().map(CellText::new).collect(),
            assets.into_iter().map(CellText::new).collect(),
            cells
                .into_iter()
                .map(|row| row.into_iter().map(PrivilegeCell::new).collect())
                .collect(),
        )
    }

    pub fn subjects(&self) -> &[CellText] {
        &self.subjects
    }

    pub fn assets(&self) -> &[CellText] {
        &self.assets
    }

    pub fn rows(&self) -> usize {
        self.subjects.len()
    }

    pub fn cols(&self) -> usize {
        self.assets.len()
    }

    pub fn cell(&self, row: usize, col: usize) -> &PrivilegeCell {
        &self.cells[row][col]
    }

    pub fn cells(&self) -> &[Vec<PrivilegeCell>] {
        &self.cells
    }

    /// Non-empty cells in row-major order.
    pub fn granting_cells(&self) -> impl Iterator<Item = (usize, usize, &PrivilegeCell)> {
        self.cells.iter().enumerate().flat_map(|(i, row)| {
            row.iter()
                .enumerate()
                .filter(|(_, c)| !c.is_empty())
                .map(move |(j, c)| (i, j, c))
        })
    }
}

/// One role-hierarchy row. `parent`/`child` describe roles the row's role is
/// inherited by / inherits from; either may be absent.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HierarchyRow {
    pub role: CellText,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent: Option<CellText>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub child: Option<CellText>,
}

/// Rows of (role, parent, child) descriptors. The induced role->child graph
/// must be acyclic.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoleHierarchyList {
    rows: Vec<HierarchyRow>,
}

impl RoleHierarchyList {
    pub fn new(rows: Vec<HierarchyRow>) -> Result<Self> {
        for row in &rows {
            if row.role.raw.trim().is_empty() {
                return Err(Error::EmptyDescriptor("role"));
            }
        }
        let rhl = RoleHierarchyList { rows };
        rhl.check_acyclic()?;
        Ok(rhl)
    }

    pub fn rows(&self) -> &[HierarchyRow] {
        &self.rows
    }

    /// Distinct role descriptors in first-appearance order.
    pub fn roles(&self) -> Vec<&CellText> {
        let mut seen = BTreeSet::new();
        self.rows
            .iter()
            .map(|r| &r.role)
            .filter(|r| seen.insert(r.raw.as_str()))
            .collect()
    }

    /// role -> children edges induced by the rows, keyed by raw text.
    pub fn child_edges(&self) -> Vec<(&str, &str)> {
        self.rows
            .iter()
            .filter_map(|r| r.child.as_ref().map(|c| (r.role.raw.as_str(), c.raw.as_str())))
            .collect()
    }

    fn check_acyclic(&self) -> Result<()> {
        detect_cycle(&self.child_edges()).map_or(Ok(()), |path| Err(Error::HierarchyCycle(path)))
    }
}

/// Returns a rendered cycle path if the edge list contains one.
pub(crate) fn detect_cycle(edges: &[(&str, &str)]) -> Option<String> {
    let mut adjacency: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for (a, b) in edges {
        adjacency.entry(a).or_default().push(b);
        adjacency.entry(b).or_default();
    }
    // Three-color DFS; the recursion stack doubles as the cycle path.
    fn visit<'a>(
        node: &'a str,
        adjacency: &BTreeMap<&'a str, Vec<&'a str>>,
        state: &mut BTreeMap<&'a str, u8>,
        path: &mut Vec<&'a str>,
    ) -> Option<String> {
        state.insert(node, 1);
        path.push(node);
        for next in &adjacency[node] {
            match state.get(next).copied().unwrap_or(0) {
                0 => {
                    if let Some(cycle) = visit(next, adjacency, state, path) {
                        return Some(cycle);
                    }
                }
                1 => {
                    let start = path.iter().position(|n| n == next).unwrap_or(0);
                    let mut cycle: Vec<&str> = path[start..].to_vec();
                    cycle.push(next);
                    return Some(cycle.join(" -> "));
                }
                _ => {}
            }
        }
        path.pop();
        state.insert(node, 2);
        None
    }
    let mut state: BTreeMap<&str, u8> = BTreeMap::new();
    let nodes: Vec<&str> = adjacency.keys().copied().collect();
    for node in nodes {
        if state.get(node).copied().unwrap_or(0) == 0 {
            let mut path = Vec::new();
            if let Some(cycle) = visit(node, &adjacency, &mut state, &mut path) {
                return Some(cycle);
            }
        }
    }
    None
}

/// Hierarchy annotation attached to one matrix subject after the similarity
/// join: the matched hierarchy-list role plus its parent/child descriptors.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HierarchyAnnotation {
    /// The hierarchy-list role text this subject was matched to. Kept
    /// alongside the matrix's own role text, so both join columns survive.
    pub source_role: CellText,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent: Option<CellText>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub child: Option<CellText>,
}

/// An access matrix extended with per-subject hierarchy annotations.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtendedAccessMatrix {
    pub matrix: AccessMatrix,
    /// Indexed by subject; a subject with no match has an empty list.
    hierarchy: Vec<Vec<HierarchyAnnotation>>,
}

impl ExtendedAccessMatrix {
    pub fn new(matrix: AccessMatrix, hierarchy: Vec<Vec<HierarchyAnnotation>>) -> Result<Self> {
        if hierarchy.len() != matrix.rows() {
            return Err(Error::HierarchySubjectOutOfRange {
                row: 0,
                index: hierarchy.len(),
                len: matrix.rows(),
            });
        }
        Ok(ExtendedAccessMatrix { matrix, hierarchy })
    }

    /// The matrix with an empty hierarchy annex.
    pub fn bare(matrix: AccessMatrix) -> Self {
        let hierarchy = vec![Vec::new(); matrix.rows()];
        ExtendedAccessMatrix { matrix, hierarchy }
    }

    pub fn annotations(&self, subject: usize) -> &[HierarchyAnnotation] {
        &self.hierarchy[subject]
    }

    pub fn hierarchy(&self) -> &[Vec<HierarchyAnnotation>] {
        &self.hierarchy
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn classify_examples() {
        assert_eq!(
            classify_text(
                "A person who works in a charitable organization to gain experience in overseeing operations and programs."
            ),
            TextKind::NL
        );
        assert_eq!(classify_text(""), TextKind::NL);
        assert_eq!(
            classify_text("CREATE VIEW query2view0 AS SELECT Model FROM CAR_NAMES GROUP BY Model"),
            TextKind::SQL
        );
        // Lower-case keywords are not anchors.
        assert_eq!(classify_text("please select something"), TextKind::NL);
        // Keyword must be a standalone token.
        assert_eq!(classify_text("SELECTION criteria"), TextKind::NL);
    }

    #[test]
    fn parse_privilege_lists() {
        assert_eq!(
            parse_privileges("SELECT, UPDATE, INSERT, GRANT"),
            ParsedPrivileges::Set(
                PrivilegeSet::new([Operator::Select, Operator::Update, Operator::Insert, Operator::Grant])
                    .unwrap()
            )
        );
        assert_eq!(parse_privileges(""), ParsedPrivileges::Set(PrivilegeSet::EMPTY));
        assert_eq!(
            parse_privileges("This role is authorized to perform actions on this database view."),
            ParsedPrivileges::Opaque
        );
        assert_eq!(
            parse_privileges("SELECT WITH GRANT OPTION"),
            ParsedPrivileges::Set(PrivilegeSet::new([Operator::Select, Operator::Grant]).unwrap())
        );
        // Delegation of nothing stays opaque rather than forming {GRANT}.
        assert_eq!(parse_privileges("GRANT"), ParsedPrivileges::Opaque);
    }

    #[test]
    fn privilege_render_reparse_roundtrip() {
        for set in PrivilegeSet::universe() {
            if set.contains(Operator::Grant) && set.len() == 1 {
                continue;
            }
            let rendered = set.render();
            assert_eq!(parse_privileges(&rendered), ParsedPrivileges::Set(set), "{rendered:?}");
        }
    }

    #[test]
    fn grant_alone_rejected() {
        assert!(matches!(PrivilegeSet::new([Operator::Grant]), Err(Error::GrantAlone)));
        assert!(PrivilegeSet::new([Operator::Grant, Operator::Select]).is_ok());
    }

    #[test]
    fn subset_matches_bruteforce() {
        // Exhaustive over the 64x64 lattice against a per-operator check.
        for a in PrivilegeSet::universe() {
            for b in PrivilegeSet::universe() {
                let brute = Operator::ALL.iter().all(|op| !a.contains(*op) || b.contains(*op));
                assert_eq!(a.is_subset(b), brute);
            }
        }
    }

    #[test]
    fn matrix_rejects_duplicates_and_ragged() {
        let err = AccessMatrix::from_raw(
            vec!["ceo", "ceo"],
            vec!["t"],
            vec![vec!["SELECT"], vec![""]],
        )
        .unwrap_err();
        assert!(matches!(err, Error::DuplicateSubject(s) if s == "ceo"));

        let err = AccessMatrix::from_raw(vec!["a"], vec!["t", "t"], vec![vec!["", ""]]).unwrap_err();
        assert!(matches!(err, Error::DuplicateAsset(_)));

        let err =
            AccessMatrix::from_raw(vec!["a"], vec!["t", "u"], vec![vec![""]]) .unwrap_err();
        assert!(matches!(err, Error::RaggedGrid { row: 0, got: 1, expected: 2 }));
    }

    #[test]
    fn empty_cells_are_permitted() {
        let m = AccessMatrix::from_raw(vec!["analyst"], vec!["customer table"], vec![vec![""]]).unwrap();
        assert!(m.cell(0, 0).is_empty());
        assert_eq!(m.granting_cells().count(), 0);
    }

    #[test]
    fn rhl_cycle_detection() {
        let rows = vec![
            HierarchyRow { role: CellText::new("a"), parent: None, child: Some(CellText::new("b")) },
            HierarchyRow { role: CellText::new("b"), parent: None, child: Some(CellText::new("a")) },
        ];
        assert!(matches!(RoleHierarchyList::new(rows), Err(Error::HierarchyCycle(_))));

        let rows = vec![
            HierarchyRow { role: CellText::new("a"), parent: None, child: Some(CellText::new("b")) },
            HierarchyRow { role: CellText::new("b"), parent: Some(CellText::new("a")), child: None },
        ];
        assert!(RoleHierarchyList::new(rows).is_ok());
    }

    #[test]
    fn extract_literal_examples() {
        assert_eq!(extract_literals("rows where height is more than 80"), vec!["80"]);
        assert_eq!(extract_literals("GRANT SELECT ON customer TO John;"), Vec::<String>::new());
        assert_eq!(extract_literals("status = 'Live_Final'"), vec!["Live_Final"]);
    }
}
