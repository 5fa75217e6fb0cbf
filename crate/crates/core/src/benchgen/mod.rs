//! Benchmark construction and scoring: matrix triples with NL perturbations,
//! hierarchy benchmarks over real tree shapes, confusion-matrix scorecards,
//! and execution-equivalence synthesis scoring.

mod taxonomy;
mod trees;

pub use taxonomy::{classify_query, SynthesisTable, CATEGORY_ORDER};
pub use trees::{balanced_tree, deep_tree, tree_stats, wide_tree, TreeStats};

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::acm::{
    AccessMatrix, CellText, ExtendedAccessMatrix, HierarchyAnnotation, Operator, PrivilegeCell,
    PrivilegeSet, RoleHierarchyList,
};
use crate::catalog::{snapshot_equivalence, CatalogTarget, EmbeddedSandbox};
use crate::error::Result;

/// Documented seeded generator (splitmix64), so benchmark outputs are
/// reproducible run to run and across platforms.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9e3779b97f4a7c15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        z ^ (z >> 31)
    }

    /// Uniform in `0..n` (n > 0).
    pub fn below(&mut self, n: u64) -> u64 {
        self.next_u64() % n
    }
}

/// One corpus entry: the NL description of a view and its ground-truth SQL.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorpusPair {
    pub nl: String,
    pub sql: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub category: Option<String>,
}

/// Which matrix axis a perturbation rewrites.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PerturbationTarget {
    Roles,
    Privileges,
    Views,
}

/// A named text perturbation. The fixture maps original texts to their
/// perturbed forms; texts without an entry pass through unchanged, and a
/// spec without a fixture is the identity perturbation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PerturbationSpec {
    pub target: PerturbationTarget,
    pub mode: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixture: Option<BTreeMap<String, String>>,
}

impl PerturbationSpec {
    pub fn identity() -> Self {
        PerturbationSpec {
            target: PerturbationTarget::Roles,
            mode: "identity".into(),
            fixture: None,
        }
    }

    pub fn from_json(bytes: &[u8]) -> Result<Self> {
        Ok(serde_json::from_slice(bytes)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    fn apply(&self, text: &str) -> String {
        self.fixture
            .as_ref()
            .and_then(|map| map.get(text))
            .cloned()
            .unwrap_or_else(|| text.to_string())
    }
}

/// Base/SQL/perturbed matrices over the same grid. The (i, j)th cell of all
/// three describes the same privileges for the same role on the same view,
/// so the ground-truth alignment is the identity.
#[derive(Debug, Clone)]
pub struct BenchmarkTriple {
    pub base: AccessMatrix,
    pub sql: AccessMatrix,
    pub perturbed: AccessMatrix,
}

impl BenchmarkTriple {
    /// Identity correspondence between any two members of the triple.
    pub fn alignment(&self) -> Vec<(usize, usize)> {
        (0..self.base.rows()).map(|i| (i, i)).collect()
    }
}

/// Build a benchmark triple: assets from the corpus pairs, subjects from the
/// role list, cells populated with seeded random privilege sets, and the
/// perturbation applied to its target axis.
pub fn build_triple(
    pairs: &[CorpusPair],
    roles: &[String],
    perturbation: &PerturbationSpec,
    seed: u64,
) -> Result<BenchmarkTriple> {
    let mut rng = SplitMix64::new(seed);
    let mut cells_text: Vec<Vec<String>> = Vec::new();
    for _ in roles {
        let mut row = Vec::new();
        for _ in pairs {
            row.push(random_privileges(&mut rng).render());
        }
        cells_text.push(row);
    }

    let base = AccessMatrix::new(
        roles.iter().map(CellText::nl).collect(),
        pairs.iter().map(|p| CellText::nl(&p.nl)).collect(),
        cells_text
            .iter()
            .map(|row| row.iter().map(PrivilegeCell::new).collect())
            .collect(),
    )?;

    let sql = AccessMatrix::new(
        unique_labels(roles).into_iter().map(CellText::sql).collect(),
        pairs.iter().map(|p| CellText::sql(&p.sql)).collect(),
        cells_text
            .iter()
            .map(|row| row.iter().map(PrivilegeCell::new).collect())
            .collect(),
    )?;

    let perturb_header = |texts: &[CellText], target: PerturbationTarget| -> Vec<CellText> {
        texts
            .iter()
            .map(|t| {
                if perturbation.target == target {
                    CellText::nl(perturbation.apply(&t.raw))
                } else {
                    t.clone()
                }
            })
            .collect()
    };
    let perturbed = AccessMatrix::new(
        perturb_header(base.subjects(), PerturbationTarget::Roles),
        perturb_header(base.assets(), PerturbationTarget::Views),
        cells_text
            .iter()
            .map(|row| {
                row.iter()
                    .map(|text| {
                        if perturbation.target == PerturbationTarget::Privileges {
                            PrivilegeCell::new(perturbation.apply(text))
                        } else {
                            PrivilegeCell::new(text.clone())
                        }
                    })
                    .collect()
            })
            .collect(),
    )?;

    Ok(BenchmarkTriple { base, sql, perturbed })
}

/// 1..=3 operators sampled from the non-delegation universe.
fn random_privileges(rng: &mut SplitMix64) -> PrivilegeSet {
    const POOL: [Operator; 5] = [
        Operator::Select,
        Operator::Insert,
        Operator::Update,
        Operator::Delete,
        Operator::Create,
    ];
    let count = 1 + rng.below(3) as usize;
    let mut ops = BTreeSet::new();
    while ops.len() < count {
        ops.insert(POOL[rng.below(POOL.len() as u64) as usize]);
    }
    ops.into_iter().collect()
}

/// Deterministic slug labels for the SQL-side matrix, with collision
/// suffixes.
fn unique_labels(roles: &[String]) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for role in roles {
        let mut slug: String = role
            .chars()
            .map(|c| if c.is_ascii_alphanumeric() { c.to_ascii_lowercase() } else { '_' })
            .collect::<String>()
            .split('_')
            .filter(|s| !s.is_empty())
            .collect::<Vec<_>>()
            .join("_");
        if slug.is_empty() {
            slug = "role".into();
        }
        let mut candidate = slug.clone();
        let mut n = 2;
        while out.contains(&candidate) {
            candidate = format!("{slug}_{n}");
            n += 1;
        }
        out.push(candidate);
    }
    out
}

/// A hierarchy benchmark: the policy-side matrix plus the implementation
/// extended matrix built by a plain equijoin over manual labels.
#[derive(Debug, Clone)]
pub struct HierarchyBench {
    pub rhl: RoleHierarchyList,
    pub policy: AccessMatrix,
    pub implementation: ExtendedAccessMatrix,
    /// Descriptor -> manual label, the implementation-side join key.
    pub labels: BTreeMap<String, String>,
}

/// Post-order privilege assignment over the tree: leaves draw at most 3
/// operators, every non-leaf cell is exactly the union of its children's
/// cells. The implementation side substitutes manual labels and ground-truth
/// SQL and joins hierarchy rows by label equality.
pub fn build_hierarchy_bench(
    tree: &RoleHierarchyList,
    pairs: &[CorpusPair],
    seed: u64,
) -> Result<HierarchyBench> {
    let roles: Vec<String> = tree.roles().iter().map(|r| r.raw.clone()).collect();
    let children: BTreeMap<String, Vec<String>> = {
        let mut map: BTreeMap<String, Vec<String>> = BTreeMap::new();
        for (parent, child) in tree.child_edges() {
            map.entry(parent.to_string()).or_default().push(child.to_string());
        }
        map
    };

    let mut rng = SplitMix64::new(seed);
    // role -> per-asset privilege sets, assigned post-order.
    let mut assigned: BTreeMap<String, Vec<PrivilegeSet>> = BTreeMap::new();
    fn assign(
        role: &str,
        n_assets: usize,
        children: &BTreeMap<String, Vec<String>>,
        rng: &mut SplitMix64,
        assigned: &mut BTreeMap<String, Vec<PrivilegeSet>>,
    ) {
        if assigned.contains_key(role) {
            return;
        }
        let kids = children.get(role).cloned().unwrap_or_default();
        let sets: Vec<PrivilegeSet> = if kids.is_empty() {
            (0..n_assets).map(|_| random_privileges(rng)).collect()
        } else {
            let mut kid_sets: Vec<Vec<PrivilegeSet>> = Vec::new();
            for kid in &kids {
                assign(kid, n_assets, children, rng, assigned);
                kid_sets.push(assigned[kid].clone());
            }
            (0..n_assets)
                .map(|j| {
                    kid_sets.iter().fold(PrivilegeSet::EMPTY, |acc, sets| acc.union(sets[j]))
                })
                .collect()
        };
        assigned.insert(role.to_string(), sets);
    }
    for role in &roles {
        assign(role, pairs.len(), &children, &mut rng, &mut assigned);
    }

    let policy = AccessMatrix::new(
        roles.iter().map(CellText::nl).collect(),
        pairs.iter().map(|p| CellText::nl(&p.nl)).collect(),
        roles
            .iter()
            .map(|r| assigned[r].iter().map(|s| PrivilegeCell::new(s.render())).collect())
            .collect(),
    )?;

    let labels: BTreeMap<String, String> = roles
        .iter()
        .zip(unique_labels(&roles))
        .map(|(r, l)| (r.clone(), l))
        .collect();

    let impl_matrix = AccessMatrix::new(
        roles.iter().map(|r| CellText::sql(&labels[r])).collect(),
        pairs.iter().map(|p| CellText::sql(&p.sql)).collect(),
        roles
            .iter()
            .map(|r| assigned[r].iter().map(|s| PrivilegeCell::new(s.render())).collect())
            .collect(),
    )?;

    // Plain equijoin: each subject picks up the label-substituted rows of
    // its own role.
    let mut annotations: Vec<Vec<HierarchyAnnotation>> = Vec::new();
    for role in &roles {
        let mut rows = Vec::new();
        for row in tree.rows().iter().filter(|row| row.role.raw == *role) {
            rows.push(HierarchyAnnotation {
                source_role: CellText::sql(&labels[role]),
                parent: row.parent.as_ref().map(|p| CellText::sql(&labels[&p.raw])),
                child: row.child.as_ref().map(|c| CellText::sql(&labels[&c.raw])),
            });
        }
        annotations.push(rows);
    }
    let implementation = ExtendedAccessMatrix::new(impl_matrix, annotations)?;

    Ok(HierarchyBench { rhl: tree.clone(), policy, implementation, labels })
}

/// Stratification label for a scorecard.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Stratum {
    pub database: String,
    pub perturbation: String,
}

/// Confusion counts plus derived precision/recall/F1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreCard {
    pub stratum: Stratum,
    pub true_positives: u64,
    pub false_positives: u64,
    pub false_negatives: u64,
}

impl ScoreCard {
    pub fn from_counts(stratum: Stratum, tp: u64, fp: u64, fn_count: u64) -> Self {
        ScoreCard {
            stratum,
            true_positives: tp,
            false_positives: fp,
            false_negatives: fn_count,
        }
    }

    pub fn precision(&self) -> f64 {
        ratio(self.true_positives, self.true_positives + self.false_positives)
    }

    pub fn recall(&self) -> f64 {
        ratio(self.true_positives, self.true_positives + self.false_negatives)
    }

    pub fn f1(&self) -> f64 {
        let p = self.precision();
        let r = self.recall();
        if p + r == 0.0 {
            0.0
        } else {
            2.0 * p * r / (p + r)
        }
    }

    /// `1 - F1`, the presentation form for near-perfect scores.
    pub fn f1_error(&self) -> f64 {
        1.0 - self.f1()
    }
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn confusion<T: Ord + Clone>(predicted: &[T], truth: &[T]) -> (u64, u64, u64) {
    let predicted: BTreeSet<T> = predicted.iter().cloned().collect();
    let truth: BTreeSet<T> = truth.iter().cloned().collect();
    let tp = predicted.intersection(&truth).count() as u64;
    let fp = predicted.difference(&truth).count() as u64;
    let fn_count = truth.difference(&predicted).count() as u64;
    (tp, fp, fn_count)
}

/// Score predicted role/view matches against the ground-truth alignment.
/// A positive is a pair shared by both matrices.
pub fn score_mapping(
    predicted: &[(usize, usize)],
    truth: &[(usize, usize)],
    stratum: Stratum,
) -> ScoreCard {
    let (tp, fp, fn_count) = confusion(predicted, truth);
    ScoreCard::from_counts(stratum, tp, fp, fn_count)
}

/// Score subsumption predictions: a positive is a (subject, asset) pair
/// whose implementation privileges are subsumed by policy.
pub fn score_subsumption(
    predicted_subsumed: &[(usize, usize)],
    truth_subsumed: &[(usize, usize)],
    stratum: Stratum,
) -> ScoreCard {
    let (tp, fp, fn_count) = confusion(predicted_subsumed, truth_subsumed);
    ScoreCard::from_counts(stratum, tp, fp, fn_count)
}

/// Score full differencing: a positive is a shared privilege, identified by
/// (subject, asset) pairs that are matched and clean in the report.
pub fn score_diff(
    predicted_shared: &[(String, String)],
    truth_shared: &[(String, String)],
    stratum: Stratum,
) -> ScoreCard {
    let (tp, fp, fn_count) = confusion(predicted_shared, truth_shared);
    ScoreCard::from_counts(stratum, tp, fp, fn_count)
}

/// One synthesized statement against its ground truth, labeled with the
/// query-type category it exercises.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StatementPair {
    pub category: String,
    pub synthesized: String,
    pub truth: String,
}

/// Per-statement execution-equivalence scoring on twin sandboxes: each side
/// of a pair runs on its own freshly seeded instance and the catalogs must
/// match. Tallies land in a per-category table.
pub fn score_synthesis<F>(pairs: &[StatementPair], seed_sandbox: F) -> Result<SynthesisTable>
where
    F: Fn() -> Result<EmbeddedSandbox>,
{
    let mut table = SynthesisTable::default();
    for pair in pairs {
        let left = seed_sandbox()?;
        let right = seed_sandbox()?;
        let left_ok = left.execute(&pair.synthesized).is_ok();
        let right_ok = right.execute(&pair.truth).is_ok();
        let correct = match (left_ok, right_ok) {
            (true, true) => snapshot_equivalence(&left, &right)?.0,
            // A synthesized statement that fails where truth succeeds (or
            // vice versa) is wrong by definition.
            (false, false) => true,
            _ => false,
        };
        table.record(&pair.category, correct);
    }
    Ok(table)
}

/// Load a corpus file: a JSON list of `{nl, sql, category?}`.
pub fn load_corpus(bytes: &[u8]) -> Result<Vec<CorpusPair>> {
    Ok(serde_json::from_slice(bytes)?)
}

/// Recorded confusion counts, the fixture format scoring replays.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RecordedCounts {
    pub stratum: Stratum,
    pub true_positives: u64,
    pub false_positives: u64,
    pub false_negatives: u64,
}

/// Rebuild scorecards from recorded confusion counts.
pub fn replay_counts(records: &[RecordedCounts]) -> Vec<ScoreCard> {
    records
        .iter()
        .map(|r| {
            ScoreCard::from_counts(
                r.stratum.clone(),
                r.true_positives,
                r.false_positives,
                r.false_negatives,
            )
        })
        .collect()
}

/// Seeded random all-SQL matrix, used by differencing property checks.
pub fn random_sql_matrix(seed: u64, rows: usize, cols: usize) -> AccessMatrix {
    let mut rng = SplitMix64::new(seed);
    let subjects: Vec<CellText> = (0..rows).map(|i| CellText::sql(format!("role_{i}"))).collect();
    let assets: Vec<CellText> = (0..cols).map(|j| CellText::sql(format!("table_{j}"))).collect();
    let cells: Vec<Vec<PrivilegeCell>> = (0..rows)
        .map(|_| {
            (0..cols)
                .map(|_| {
                    if rng.below(4) == 0 {
                        PrivilegeCell::empty()
                    } else {
                        PrivilegeCell::new(random_privileges(&mut rng).render())
                    }
                })
                .collect()
        })
        .collect();
    AccessMatrix::new(subjects, assets, cells).expect("generated matrix is valid")
}

/// Seeded random tree over `n` synthetic roles (node 0 is the root; every
/// other node's parent is a lower-numbered node).
pub fn random_role_tree(seed: u64, n: usize) -> RoleHierarchyList {
    use crate::acm::HierarchyRow;
    let mut rng = SplitMix64::new(seed);
    let name = |i: usize| format!("role_{i}");
    let mut parent_of: Vec<usize> = vec![0; n];
    for i in 1..n {
        parent_of[i] = rng.below(i as u64) as usize;
    }
    let mut rows = Vec::new();
    for i in 0..n {
        let children: Vec<usize> = (1..n).filter(|&j| parent_of[j] == i).collect();
        if children.is_empty() {
            rows.push(HierarchyRow {
                role: CellText::nl(name(i)),
                parent: (i > 0).then(|| CellText::nl(name(parent_of[i]))),
                child: None,
            });
        } else {
            for child in children {
                rows.push(HierarchyRow {
                    role: CellText::nl(name(i)),
                    parent: (i > 0).then(|| CellText::nl(name(parent_of[i]))),
                    child: Some(CellText::nl(name(child))),
                });
            }
        }
    }
    RoleHierarchyList::new(rows).expect("generated tree is acyclic")
}
