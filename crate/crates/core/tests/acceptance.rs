//! Acceptance suite: one test per release criterion, each printing a
//! pass/fail line and enforcing its runtime budget.
//!
//! Run with `cargo test --test acceptance -- --nocapture` to see the lines.

use std::collections::{BTreeMap, BTreeSet};
use std::time::{Duration, Instant};

use nlac_core::acm::{
    parse_privileges, AccessMatrix, CellText, Operator, ParsedPrivileges, PrivilegeCell,
    PrivilegeSet,
};
use nlac_core::benchgen::{
    balanced_tree, build_hierarchy_bench, deep_tree, random_role_tree, random_sql_matrix,
    replay_counts, score_synthesis, tree_stats, wide_tree, CorpusPair, RecordedCounts, SplitMix64,
    StatementPair, SynthesisTable,
};
use nlac_core::catalog::{
    execute_script, generate_acm, snapshot_equivalence, CatalogTarget, EmbeddedSandbox,
};
use nlac_core::differencer::{Differencer, SubsumptionVerdict};
use nlac_core::gateway::{Gateway, ReplayStore};
use nlac_core::hierarchy::{apply_inheritance, privilege_closure, ResolvedHierarchy};
use nlac_core::synthesizer::{
    grant_statement, repair_literals, ColumnDef, SchemaContext, ScriptStatement, SqlScript,
    StatementKind, Synthesizer, TableDef, TrigramEmbedder,
};

fn finish(name: &str, budget: Duration, started: Instant) {
    let elapsed = started.elapsed();
    assert!(
        elapsed < budget,
        "{name}: took {elapsed:?}, budget {budget:?}"
    );
    println!("acceptance {name}: pass ({elapsed:?})");
}

// --- criterion 1: subsumption lattice -----------------------------------

#[test]
fn criterion_1_subsumption_lattice() {
    let started = Instant::now();
    let gw = Gateway::oracle(|_, _| None);
    let differencer = Differencer::new(&gw);

    // Deterministic subsumption equals subset inclusion over all 4,096
    // operator-set pairs, checked against a per-operator brute force.
    let mut checked = 0;
    for policy in PrivilegeSet::universe() {
        for implementation in PrivilegeSet::universe() {
            let brute = Operator::ALL
                .iter()
                .all(|op| !implementation.contains(*op) || policy.contains(*op));
            assert_eq!(implementation.is_subset(policy), brute);
            checked += 1;

            // The cell-level path agrees wherever both sides are renderable
            // operator lists (GRANT alone is not).
            let renderable = |s: PrivilegeSet| {
                matches!(parse_privileges(&s.render()), ParsedPrivileges::Set(x) if x == s)
            };
            if renderable(policy) && renderable(implementation) {
                let verdict = differencer
                    .subsumption(
                        &PrivilegeCell::new(policy.render()),
                        &PrivilegeCell::new(implementation.render()),
                    )
                    .unwrap();
                match verdict {
                    SubsumptionVerdict::Subsumed => assert!(brute),
                    SubsumptionVerdict::Violation { operators } => {
                        assert!(!brute);
                        assert_eq!(operators, implementation.difference(policy).render());
                    }
                    SubsumptionVerdict::OpaqueViolation { .. } => {
                        panic!("parsed cells must never take the opaque path")
                    }
                }
            }
        }
    }
    assert_eq!(checked, 4096);
    assert_eq!(gw.call_count(), 0, "lattice checks must not touch the gateway");

    // Partial-order laws on the 64-element lattice.
    for a in PrivilegeSet::universe() {
        assert!(a.is_subset(a));
        for b in PrivilegeSet::universe() {
            if a.is_subset(b) && b.is_subset(a) {
                assert_eq!(a, b);
            }
            for c in PrivilegeSet::universe() {
                if a.is_subset(b) && b.is_subset(c) {
                    assert!(a.is_subset(c));
                }
            }
        }
    }

    finish("1 (subsumption lattice)", Duration::from_secs(1), started);
}

// --- criterion 2: closure oracle and inheritance round trip --------------

fn brute_force_closure(
    role: &str,
    edges: &[(String, String)],
    base: &BTreeMap<String, PrivilegeSet>,
) -> PrivilegeSet {
    // Independent oracle: BFS reachability, then a flat union.
    let mut reachable: BTreeSet<&str> = BTreeSet::new();
    let mut queue = vec![role];
    while let Some(node) = queue.pop() {
        if !reachable.insert(node) {
            continue;
        }
        for (from, to) in edges {
            if from == node {
                queue.push(to);
            }
        }
    }
    reachable
        .into_iter()
        .fold(PrivilegeSet::EMPTY, |acc, r| {
            acc.union(base.get(r).copied().unwrap_or(PrivilegeSet::EMPTY))
        })
}

#[test]
fn criterion_2_closure_oracle_and_round_trip() {
    let started = Instant::now();

    // privilege_closure equals the brute-force transitive union on 100
    // random DAGs of up to 50 nodes.
    for seed in 0..100u64 {
        let mut rng = SplitMix64::new(seed);
        let n = 2 + (rng.below(49) as usize);
        let names: Vec<String> = (0..n).map(|i| format!("r{i}")).collect();
        let mut edges = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                if rng.below(5) == 0 {
                    edges.push((names[i].clone(), names[j].clone()));
                }
            }
        }
        let mut base: BTreeMap<String, PrivilegeSet> = BTreeMap::new();
        for name in &names {
            let ops: PrivilegeSet = Operator::ALL
                .into_iter()
                .filter(|_| rng.below(3) == 0)
                .collect();
            base.insert(name.clone(), ops);
        }
        for name in &names {
            let fast = privilege_closure(name, &edges, &base).unwrap();
            let brute = brute_force_closure(name, &edges, &base);
            assert_eq!(fast, brute, "seed {seed} role {name}");
        }
    }

    // apply_inheritance preserves effective privileges: executing the
    // rewritten script yields the same generated matrix as the direct one.
    let corpus: Vec<CorpusPair> = (0..2)
        .map(|j| CorpusPair {
            nl: format!("view {j}"),
            sql: format!("SELECT c FROM t{j}"),
            category: None,
        })
        .collect();
    for seed in 0..100u64 {
        let n = 3 + (seed as usize % 48);
        let tree = random_role_tree(seed, n);
        let bench = build_hierarchy_bench(&tree, &corpus, seed).unwrap();

        let impl_matrix = &bench.implementation.matrix;
        let mut statements = Vec::new();
        for subject in impl_matrix.subjects() {
            statements.push(ScriptStatement::new(
                StatementKind::CreateRole,
                format!("CREATE ROLE {};", subject.raw),
            ));
        }
        let mut grants = Vec::new();
        for (i, j, cell) in impl_matrix.granting_cells() {
            let ParsedPrivileges::Set(ops) = cell.parse() else { panic!("operator cells") };
            grants.push(ScriptStatement::with_provenance(
                StatementKind::Grant,
                grant_statement(&impl_matrix.subjects()[i].raw, &format!("t{j}"), ops).unwrap(),
                (i, j),
            ));
        }
        statements.extend(grants);
        let direct = SqlScript::new(statements).unwrap();

        let edges: Vec<(String, String)> = tree
            .child_edges()
            .into_iter()
            .map(|(p, c)| (bench.labels[p].clone(), bench.labels[c].clone()))
            .collect();
        let hierarchy = ResolvedHierarchy { edges, flags: vec![] };
        let rewritten =
            apply_inheritance(&direct, &hierarchy, &BTreeSet::new()).unwrap().script;

        let seed_tables = "CREATE TABLE t0 (c INT); CREATE TABLE t1 (c INT);";
        let run = |script: &SqlScript| -> AccessMatrix {
            let sandbox = EmbeddedSandbox::new().unwrap();
            sandbox.execute_batch(seed_tables).unwrap();
            for result in execute_script(script, &sandbox) {
                assert!(result.is_ok(), "seed {seed}: {result:?}");
            }
            generate_acm(
                &sandbox.fetch_grants().unwrap(),
                &sandbox.fetch_inheritance().unwrap(),
            )
            .unwrap()
        };
        assert_eq!(run(&direct), run(&rewritten), "seed {seed}");
    }

    finish("2 (closure oracle + inheritance round trip)", Duration::from_secs(10), started);
}

// --- criterion 3: differencer reflexivity and mutation detection ---------

#[test]
fn criterion_3_differencer_reflexivity_and_mutations() {
    let started = Instant::now();
    let gw = Gateway::oracle(|_, _| None);
    let differencer = Differencer::new(&gw);

    let mut detected = 0;
    for seed in 0..200u64 {
        let mut rng = SplitMix64::new(seed.wrapping_mul(31).wrapping_add(7));
        let rows = 2 + rng.below(5) as usize;
        let cols = 2 + rng.below(5) as usize;
        let matrix = random_sql_matrix(seed, rows, cols);

        let report = differencer.diff(&matrix, &matrix).unwrap();
        assert!(report.is_empty(), "seed {seed}: diff(M, M) must be empty");

        let mutated = mutate(&matrix, &mut rng);
        let report = differencer.diff(&matrix, &mutated).unwrap();
        if !report.is_empty() {
            detected += 1;
        }
    }
    assert_eq!(detected, 200, "single-mutation detection must be 200/200");
    assert_eq!(gw.call_count(), 0, "all-SQL differencing must make zero calls");

    finish("3 (differencer reflexivity + mutations)", Duration::from_secs(10), started);
}

/// One random violation-introducing mutation: widen a cell, or add a
/// granted row/column.
fn mutate(matrix: &AccessMatrix, rng: &mut SplitMix64) -> AccessMatrix {
    let rows = matrix.rows();
    let cols = matrix.cols();
    let mut subjects = matrix.subjects().to_vec();
    let mut assets = matrix.assets().to_vec();
    let mut cells: Vec<Vec<PrivilegeCell>> = matrix.cells().to_vec();

    match rng.below(3) {
        0 => {
            // Add an operator somewhere; scan from a random start for a
            // cell that can still grow.
            let start = rng.below((rows * cols) as u64) as usize;
            for k in 0..rows * cols {
                let idx = (start + k) % (rows * cols);
                let (i, j) = (idx / cols, idx % cols);
                let current = match cells[i][j].parse() {
                    ParsedPrivileges::Set(s) => s,
                    ParsedPrivileges::Opaque => continue,
                };
                if let Some(op) = Operator::ALL.into_iter().find(|op| {
                    !current.contains(*op)
                        && PrivilegeSet::new(current.iter().chain([*op])).is_ok()
                }) {
                    let widened: PrivilegeSet = current.iter().chain([op]).collect();
                    cells[i][j] = PrivilegeCell::new(widened.render());
                    return AccessMatrix::new(subjects, assets, cells).unwrap();
                }
            }
            // Everything saturated (vanishingly unlikely); fall through to
            // adding a row.
            add_row(&mut subjects, &mut cells, cols);
            AccessMatrix::new(subjects, assets, cells).unwrap()
        }
        1 => {
            add_row(&mut subjects, &mut cells, cols);
            AccessMatrix::new(subjects, assets, cells).unwrap()
        }
        _ => {
            assets.push(CellText::sql(format!("table_{cols}")));
            for (i, row) in cells.iter_mut().enumerate() {
                row.push(if i == 0 {
                    PrivilegeCell::new("SELECT")
                } else {
                    PrivilegeCell::empty()
                });
            }
            AccessMatrix::new(subjects, assets, cells).unwrap()
        }
    }
}

fn add_row(subjects: &mut Vec<CellText>, cells: &mut Vec<Vec<PrivilegeCell>>, cols: usize) {
    subjects.push(CellText::sql(format!("role_{}", subjects.len())));
    let mut row = vec![PrivilegeCell::empty(); cols];
    row[0] = PrivilegeCell::new("SELECT");
    cells.push(row);
}

// --- criterion 4: synthesize -> execute -> generate -> diff --------------

/// Squad names for the 10x10 pipeline fixture. Plain lowercase words carry
/// no extractable literals, so literal pruning keeps every candidate and
/// the prompt paths are exercised.
const SQUADS: [&str; 10] = [
    "alpha", "bravo", "charlie", "delta", "echo", "foxtrot", "golf", "hotel", "india", "juliett",
];

/// Cell spec for the 10x10 pipeline matrix. (0,0) is the delegation case;
/// (1,1) is a carrier phrase; every (i+j) % 3 == 0 cell (other than those)
/// is empty; the rest are canonical operator lists.
fn cell_spec(i: usize, j: usize) -> (String, Option<&'static str>) {
    if (i, j) == (0, 0) {
        return (
            "select access with the option of passing down this privilege".into(),
            Some("SELECT, GRANT"),
        );
    }
    if (i, j) == (1, 1) {
        return ("may read and add rows in this view".into(), Some("SELECT, INSERT"));
    }
    if (i + j) % 3 == 0 {
        return (String::new(), None);
    }
    let lists = ["SELECT", "SELECT, INSERT", "SELECT, UPDATE, DELETE", "INSERT, UPDATE"];
    let text = lists[(i * 10 + j) % 4];
    (text.into(), Some(text))
}

fn pipeline_matrix() -> AccessMatrix {
    let mut subjects = vec!["John".to_string()];
    subjects.extend(SQUADS[..9].iter().map(|w| format!("team member {w}")));
    let assets: Vec<String> =
        SQUADS.iter().map(|w| format!("the cars view for squad {w}")).collect();
    let cells: Vec<Vec<String>> =
        (0..10).map(|i| (0..10).map(|j| cell_spec(i, j).0).collect()).collect();
    AccessMatrix::new(
        subjects.into_iter().map(CellText::nl).collect(),
        assets.into_iter().map(CellText::nl).collect(),
        cells
            .into_iter()
            .map(|row| row.into_iter().map(PrivilegeCell::new).collect())
            .collect(),
    )
    .unwrap()
}

fn pipeline_schema() -> SchemaContext {
    SchemaContext::new(vec![TableDef {
        name: "cars".into(),
        columns: vec![
            ColumnDef { name: "model".into(), data_type: "TEXT".into() },
            ColumnDef { name: "horsepower".into(), data_type: "INT".into() },
        ],
    }])
}

fn word_after<'a>(prompt: &'a str, marker: &str) -> Option<&'a str> {
    let pos = prompt.find(marker)? + marker.len();
    let rest = &prompt[pos..];
    let end = rest
        .find(|c: char| !c.is_ascii_lowercase())
        .unwrap_or(rest.len());
    (end > 0).then(|| &rest[..end])
}

fn view_definition(word: &str) -> String {
    let index = SQUADS.iter().position(|w| *w == word).unwrap_or(0);
    format!("SELECT model FROM cars WHERE horsepower > {}", 100 + index)
}

/// The exact-oracle rule table for the full pipeline.
fn pipeline_oracle(template: &str, prompt: &str) -> Option<String> {
    match template {
        "role_label" => {
            let w = word_after(prompt, "team member ")?;
            Some(format!("role_{w}"))
        }
        "view_completion" => {
            let w = word_after(prompt, "squad ")?;
            Some(format!("view_{w} AS {}", view_definition(w)))
        }
        "privilege_map" => {
            if prompt.contains("passing down this privilege") {
                Some("SELECT WITH GRANT OPTION".into())
            } else if prompt.contains("read and add rows") {
                Some("SELECT, INSERT permitted".into())
            } else {
                None
            }
        }
        "nl_vs_sql_role" => {
            let w = word_after(prompt, "team member ")?;
            Some(format!("role_{w}"))
        }
        "nl_vs_sql_view" => {
            let w = word_after(prompt, "squad ")?;
            Some(format!("view_{w}"))
        }
        "privilege_exceeds" => Some("No, the implementation stays within the policy.".into()),
        _ => None,
    }
}

fn seeded_cars_sandbox() -> EmbeddedSandbox {
    let sandbox = EmbeddedSandbox::new().unwrap();
    sandbox
        .execute_batch(
            "CREATE TABLE cars (model TEXT, horsepower INT);
             INSERT INTO cars VALUES ('roadster', 300), ('hatchback', 90);",
        )
        .unwrap();
    sandbox
}

/// The label the synthesizer assigns to subject i.
fn expected_label(i: usize) -> String {
    if i == 0 {
        "John".to_string()
    } else {
        format!("role_{}", SQUADS[i - 1])
    }
}

/// Ground truth script assembled from the explicit cell table above,
/// independent of the synthesizer path.
fn ground_truth_script() -> SqlScript {
    let mut statements = Vec::new();
    for i in 0..10 {
        statements.push(ScriptStatement::new(
            StatementKind::CreateRole,
            format!("CREATE ROLE {};", expected_label(i)),
        ));
    }
    for word in SQUADS {
        statements.push(ScriptStatement::new(
            StatementKind::CreateView,
            format!("CREATE VIEW view_{word} AS {};", view_definition(word)),
        ));
    }
    for i in 0..10 {
        for j in 0..10 {
            let (_, expected) = cell_spec(i, j);
            let Some(expected) = expected else { continue };
            let ParsedPrivileges::Set(ops) = parse_privileges(expected) else {
                panic!("expected ops parse")
            };
            statements.push(ScriptStatement::with_provenance(
                StatementKind::Grant,
                grant_statement(&expected_label(i), &format!("view_{}", SQUADS[j]), ops).unwrap(),
                (i, j),
            ));
        }
    }
    SqlScript::new(statements).unwrap()
}

#[test]
fn criterion_4_synthesize_execute_generate_diff() {
    let started = Instant::now();
    let gw = Gateway::oracle(pipeline_oracle);
    let synthesizer = Synthesizer::new(&gw);
    let matrix = pipeline_matrix();
    let schema = pipeline_schema();

    let outcome = synthesizer.synthesize(&matrix, &schema).unwrap();
    assert_eq!(outcome.failed_cells(), 0, "{:?}", outcome.report);

    // The delegation cell carries its grant option.
    assert!(outcome
        .script
        .statements()
        .iter()
        .any(|s| s.text == "GRANT SELECT ON view_alpha TO John WITH GRANT OPTION;"));

    let synth_sandbox = seeded_cars_sandbox();
    for result in execute_script(&outcome.script, &synth_sandbox) {
        assert!(result.is_ok(), "{result:?}");
    }

    let truth_sandbox = seeded_cars_sandbox();
    for result in execute_script(&ground_truth_script(), &truth_sandbox) {
        assert!(result.is_ok(), "{result:?}");
    }

    let (equal, diff_lines) = snapshot_equivalence(&synth_sandbox, &truth_sandbox).unwrap();
    assert!(equal, "catalogs differ from ground truth: {diff_lines:?}");

    let generated = generate_acm(
        &synth_sandbox.fetch_grants().unwrap(),
        &synth_sandbox.fetch_inheritance().unwrap(),
    )
    .unwrap();
    let differencer = Differencer::new(&gw);
    let report = differencer.diff(&matrix, &generated).unwrap();
    assert!(report.is_empty(), "round trip must be compliant: {}", report.render());

    finish("4 (synthesize/execute/generate/diff round trip)", Duration::from_secs(60), started);
}

// --- criterion 5: benchmark machinery ------------------------------------

fn round3(x: f64) -> f64 {
    (x * 1000.0).round() / 1000.0
}

#[test]
fn criterion_5_scoring_reproduces_published_arithmetic() {
    let started = Instant::now();

    // Recorded confusion counts shipped as fixtures reproduce the headline
    // error rates to three decimals.
    let bytes = std::fs::read(concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/tests/fixtures/recorded_counts.json"
    ))
    .unwrap();
    let records: Vec<RecordedCounts> = serde_json::from_slice(&bytes).unwrap();
    let cards = replay_counts(&records);
    let by_label = |label: &str| {
        cards
            .iter()
            .find(|c| c.stratum.perturbation == label)
            .unwrap_or_else(|| panic!("missing stratum {label}"))
    };
    assert_eq!(round3(by_label("NL vs NL role-view mapping").f1_error()), 0.041);
    assert_eq!(round3(by_label("NL vs SQL role-view mapping").f1_error()), 0.035);
    assert_eq!(round3(by_label("NL vs NL privilege subsumption").f1_error()), 0.003);
    assert_eq!(round3(by_label("NL vs SQL privilege subsumption").f1_error()), 0.006);

    // Synthesis scoring reproduces the per-category accuracy table shape
    // exactly: quotas per category, failures confined to nested queries
    // (all ten) and half the multi-way joins.
    let quotas: [(&str, u64, u64); 9] = [
        ("Single column Projection", 50, 0),
        ("Multiple column Projection", 50, 0),
        ("Single Whole-table Aggregation", 30, 0),
        ("Single join", 50, 0),
        ("Multi-way join", 20, 10),
        ("Common Table Expression", 40, 0),
        ("Nested Queries", 10, 10),
        ("Single WHERE clause condition", 50, 0),
        ("Multiple WHERE clause conditions", 30, 0),
    ];
    let mut pairs = Vec::new();
    for (category, total, wrong) in quotas {
        for k in 0..total {
            let truth = "GRANT SELECT ON t TO r;".to_string();
            let synthesized = if k < wrong {
                "GRANT DELETE ON t TO r;".to_string()
            } else {
                truth.clone()
            };
            pairs.push(StatementPair { category: category.into(), synthesized, truth });
        }
    }
    let table: SynthesisTable = score_synthesis(&pairs, || {
        let sandbox = EmbeddedSandbox::new()?;
        sandbox.execute_batch("CREATE TABLE t (a INT);")?;
        sandbox.execute("CREATE ROLE r;")?;
        Ok(sandbox)
    })
    .unwrap();
    assert_eq!(table.category("Nested Queries"), Some((0, 10)));
    assert_eq!(table.category("Multi-way join"), Some((10, 20)));
    assert_eq!(table.total(), (310, 330));
    let rendered = table.render();
    assert!(rendered.contains("Nested Queries 0/10"), "{rendered}");
    assert!(rendered.contains("Total Accuracy 310/330"), "{rendered}");
    assert!(rendered.contains("Single column Projection 50/50"), "{rendered}");

    finish("5 (benchmark machinery)", Duration::from_secs(5), started);
}

// --- criterion 6: hierarchy benchmark structure ---------------------------

#[test]
fn criterion_6_hierarchy_benchmark_structure() {
    let started = Instant::now();

    let deep = tree_stats(&deep_tree());
    assert_eq!((deep.nodes, deep.leaves), (16, 12));
    assert!(deep.levels >= 5, "deep tree must be chain-heavy, got {} levels", deep.levels);
    let wide = tree_stats(&wide_tree());
    assert_eq!((wide.nodes, wide.leaves, wide.levels), (19, 18, 2));
    let balanced = tree_stats(&balanced_tree());
    assert_eq!(balanced.nodes, 12);
    assert!(balanced.levels >= 3 && balanced.levels <= 4);

    let corpus: Vec<CorpusPair> = (0..4)
        .map(|j| CorpusPair {
            nl: format!("view {j}"),
            sql: format!("SELECT c{j} FROM t{j}"),
            category: None,
        })
        .collect();
    for (name, tree) in
        [("deep", deep_tree()), ("wide", wide_tree()), ("balanced", balanced_tree())]
    {
        for seed in [1u64, 2, 3] {
            let bench = build_hierarchy_bench(&tree, &corpus, seed).unwrap();
            let roles: Vec<String> =
                bench.policy.subjects().iter().map(|s| s.raw.clone()).collect();
            let edges = bench.rhl.child_edges();
            for (i, role) in roles.iter().enumerate() {
                let kids: Vec<usize> = edges
                    .iter()
                    .filter(|(p, _)| p == role)
                    .map(|(_, c)| roles.iter().position(|r| r == c).unwrap())
                    .collect();
                for j in 0..bench.policy.cols() {
                    let ParsedPrivileges::Set(set) = bench.policy.cell(i, j).parse() else {
                        panic!("cells are operator lists")
                    };
                    if kids.is_empty() {
                        assert!(
                            !set.is_empty() && set.len() <= 3,
                            "{name} seed {seed}: leaf cells draw 1..=3 operators"
                        );
                    } else {
                        let mut union = PrivilegeSet::EMPTY;
                        for &k in &kids {
                            let ParsedPrivileges::Set(s) = bench.policy.cell(k, j).parse() else {
                                panic!("cells are operator lists")
                            };
                            union = union.union(s);
                        }
                        assert_eq!(
                            set, union,
                            "{name} seed {seed}: non-leaf cell must be the union of its children"
                        );
                    }
                }
            }
        }
    }

    finish("6 (hierarchy benchmark structure)", Duration::from_secs(5), started);
}

// --- criterion 7: literal repair ------------------------------------------

#[test]
fn criterion_7_literal_repair_corpus() {
    let started = Instant::now();

    let values: [&str; 25] = [
        "Live_Final",
        "Draft_Pending",
        "Archived_2019",
        "In_Review",
        "Needs_Approval",
        "Ready_To_Ship",
        "On_Hold",
        "Cancelled_Late",
        "Waiting_Payment",
        "Quality_Check",
        "Returned_Damaged",
        "Customs_Cleared",
        "Out_For_Delivery",
        "Delivered_Signed",
        "Refund_Issued",
        "Backordered_Item",
        "Priority_Express",
        "Standard_Ground",
        "Warehouse_East",
        "Warehouse_West",
        "Inspection_Failed",
        "Inspection_Passed",
        "Label_Printed",
        "Pickup_Scheduled",
        "Address_Invalid",
    ];
    let sandbox = EmbeddedSandbox::new().unwrap();
    sandbox.execute_batch("CREATE TABLE shipments (status TEXT);").unwrap();
    for value in values {
        sandbox
            .execute_batch(&format!("INSERT INTO shipments VALUES ('{value}');"))
            .unwrap();
    }
    let schema = SchemaContext::new(vec![TableDef {
        name: "shipments".into(),
        columns: vec![ColumnDef { name: "status".into(), data_type: "TEXT".into() }],
    }]);

    // 50 corruptions: underscores to spaces, case folding, truncation.
    let mut cases: Vec<(String, &str)> = Vec::new();
    for (k, value) in values.iter().enumerate() {
        cases.push((value.replace('_', " "), value));
        if k % 2 == 0 {
            cases.push((value.to_lowercase(), value));
        } else {
            let truncated: String = value.chars().take(value.chars().count() - 2).collect();
            cases.push((truncated, value));
        }
    }
    assert_eq!(cases.len(), 50);

    let embedder = TrigramEmbedder;
    let mut restored = 0;
    for (corrupted, truth) in &cases {
        let statement = format!(
            "CREATE VIEW v AS SELECT status FROM shipments WHERE status = '{corrupted}'"
        );
        let repaired = repair_literals(&statement, &schema, &sandbox, &embedder).unwrap();
        if repaired.contains(&format!("'{truth}'")) {
            restored += 1;
        }
        // Idempotence on every case, restored or not.
        let twice = repair_literals(&repaired, &schema, &sandbox, &embedder).unwrap();
        assert_eq!(repaired, twice, "repair must be idempotent on {corrupted:?}");
    }
    assert!(restored >= 48, "restored only {restored}/50");

    finish("7 (literal repair corpus)", Duration::from_secs(10), started);
}

// --- criterion 8: generalized pipeline round trip --------------------------

fn deployment_oracle(template: &str, prompt: &str) -> Option<String> {
    match template {
        "requirement_identify" => {
            if prompt.contains("9am and 5pm") {
                Some("temporal access control".into())
            } else if prompt.contains("Role | Parent | Child") {
                Some("role hierarchy".into())
            } else {
                Some("access control privileges".into())
            }
        }
        "generalized_synthesis" => {
            if prompt.contains("Create the roles") {
                Some("CREATE ROLE ceo;\nCREATE ROLE analyst;\nGRANT analyst TO ceo;".into())
            } else if prompt.contains("Create views and grant") {
                // Planted nonexistent-column error ("amuont") for the
                // feedback loop to fix.
                Some(
                    "CREATE VIEW v_sales AS SELECT amuont FROM customer;\n\
                     GRANT SELECT ON customer TO analyst;\n\
                     GRANT SELECT ON v_sales TO analyst;\n\
                     GRANT INSERT ON customer TO ceo;"
                        .into(),
                )
            } else if prompt.contains("Apply the temporal") {
                Some(
                    "CREATE POLICY business_hours ON customer TO analyst USING (access_hour BETWEEN 9 AND 17);"
                        .into(),
                )
            } else {
                None
            }
        }
        "synthesis_feedback" => {
            if prompt.contains("\"amuont\" does not exist") {
                Some(
                    "CREATE VIEW v_sales AS SELECT amount FROM customer;\n\
                     GRANT SELECT ON customer TO analyst;\n\
                     GRANT SELECT ON v_sales TO analyst;\n\
                     GRANT INSERT ON customer TO ceo;"
                        .into(),
                )
            } else {
                None
            }
        }
        "privilege_exceeds" => Some("No.".into()),
        _ => None,
    }
}

fn write_deployment_bundle(root: &std::path::Path) {
    std::fs::create_dir_all(root.join("tables")).unwrap();
    std::fs::create_dir_all(root.join("docs")).unwrap();
    std::fs::write(
        root.join("tables/1_privileges.json"),
        br#"{
  "subjects": [{"text": "ceo", "kind": "SQL"}, {"text": "analyst", "kind": "SQL"}],
  "assets": [{"text": "customer", "kind": "SQL"}, {"text": "v_sales", "kind": "SQL"}],
  "cells": [["SELECT, INSERT", "SELECT"], ["SELECT", "SELECT"]]
}"#,
    )
    .unwrap();
    std::fs::write(root.join("tables/2_hierarchy.csv"), b"role,parent,child\nceo,,analyst\nanalyst,ceo,\n")
        .unwrap();
    std::fs::write(
        root.join("tables/3_temporal.json"),
        br#"{
  "subjects": [{"text": "analyst", "kind": "SQL"}],
  "assets": [{"text": "customer", "kind": "SQL"}],
  "cells": [["only between 9am and 5pm on weekdays"]]
}"#,
    )
    .unwrap();
    std::fs::write(root.join("docs/1_privileges.txt"), b"permitted SQL operators per role and view")
        .unwrap();
    std::fs::write(root.join("docs/2_hierarchy.txt"), b"which roles inherit from which").unwrap();
    std::fs::write(root.join("docs/3_temporal.txt"), b"when access is allowed").unwrap();
    std::fs::write(
        root.join("instructions.txt"),
        b"1. Create the roles and the role inheritance. [tables: role hierarchy]\n\
          2. Create views and grant the privileges. [tables: 1] [after: 1]\n\
          3. Apply the temporal access conditions. [tables: 3] [after: 2]\n",
    )
    .unwrap();
    std::fs::write(
        root.join("extraction_queries.json"),
        br#"{
  "access control privileges": {"kind": "table_grants"},
  "role hierarchy": {"kind": "role_memberships"},
  "temporal access control": {"kind": "row_policies"}
}"#,
    )
    .unwrap();
}

#[test]
fn criterion_8_deployment_round_trip() {
    use nlac_core::deployment::{
        apply_revisions, audit_generalized, extract_implementation, identify_requirement,
        load_bundle, resolve_dependencies, synthesize_generalized, HierarchyUnionHook,
        RevisionHook,
    };

    let started = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    write_deployment_bundle(dir.path());
    let bundle = load_bundle(dir.path()).unwrap();
    assert_eq!(bundle.tables.len(), 3);

    let gateway = Gateway::oracle(deployment_oracle);
    let mut labels = Vec::new();
    for (table, doc) in bundle.tables.iter().zip(&bundle.docs) {
        labels.push(identify_requirement(&gateway, table, doc).unwrap());
    }
    assert_eq!(
        labels,
        vec!["access control privileges", "role hierarchy", "temporal access control"]
    );

    let graph =
        resolve_dependencies(&bundle, &labels, bundle.instructions.as_ref().unwrap()).unwrap();
    let order: Vec<usize> = graph.topological().unwrap().iter().map(|s| s.index).collect();
    assert_eq!(order, vec![1, 2, 3]);

    let schema = SchemaContext::new(vec![TableDef {
        name: "customer".into(),
        columns: vec![
            ColumnDef { name: "id".into(), data_type: "INT".into() },
            ColumnDef { name: "region".into(), data_type: "TEXT".into() },
            ColumnDef { name: "amount".into(), data_type: "INT".into() },
        ],
    }]);
    let sandbox = EmbeddedSandbox::new().unwrap();
    sandbox
        .execute_batch(
            "CREATE TABLE customer (id INT, region TEXT, amount INT);
             INSERT INTO customer VALUES (1, 'north', 10), (2, 'south', 20);",
        )
        .unwrap();

    let synthesis =
        synthesize_generalized(&gateway, &bundle, &schema, &graph, &sandbox, 2).unwrap();
    // The planted nonexistent-column error is fixed within the round bound.
    let privileges_step = &synthesis.steps[1];
    assert_eq!(privileges_step.feedback_rounds, 1);
    assert!(privileges_step.feedback_rounds <= 2);
    for step in &synthesis.steps {
        assert!(step.residual_findings.is_empty(), "{:?}", step.residual_findings);
    }

    // Synthesized code executes cleanly.
    for result in sandbox.execute_all(&synthesis.code) {
        assert!(result.is_ok(), "{result:?}");
    }

    let extracted = extract_implementation(&bundle.extraction_queries, &sandbox).unwrap();
    let hook = HierarchyUnionHook {
        privileges_label: "access control privileges".into(),
        hierarchy_label: "role hierarchy".into(),
    };
    let hooks: Vec<&dyn RevisionHook> = vec![&hook];
    let revised = apply_revisions(&extracted, &hooks).unwrap();

    for (index, label) in labels.iter().enumerate() {
        let impl_table = revised.tables.get(label).unwrap();
        let report = audit_generalized(&gateway, &bundle.tables[index], impl_table).unwrap();
        assert!(report.is_empty(), "audit for {label} found: {}", report.render());
    }

    finish("8 (generalized pipeline round trip)", Duration::from_secs(60), started);
}

// --- criterion 9: replay determinism --------------------------------------

/// One full pipeline pass: synthesize, execute, generate, diff, score.
/// Returns the concatenated artifacts whose bytes must be stable.
fn full_pipeline(gateway: &Gateway) -> String {
    let synthesizer = Synthesizer::new(gateway);
    let matrix = pipeline_matrix();
    let schema = pipeline_schema();
    let outcome = synthesizer.synthesize(&matrix, &schema).unwrap();

    let sandbox = seeded_cars_sandbox();
    for result in execute_script(&outcome.script, &sandbox) {
        assert!(result.is_ok(), "{result:?}");
    }
    let generated = generate_acm(
        &sandbox.fetch_grants().unwrap(),
        &sandbox.fetch_inheritance().unwrap(),
    )
    .unwrap();
    let differencer = Differencer::new(gateway);
    let report = differencer.diff(&matrix, &generated).unwrap();

    let counts = vec![RecordedCounts {
        stratum: Default::default(),
        true_positives: 400,
        false_positives: 17,
        false_negatives: 17,
    }];
    let cards = replay_counts(&counts);

    format!(
        "{}\n{}\n{}\n",
        outcome.script.render(),
        serde_json::to_string_pretty(&report).unwrap(),
        serde_json::to_string_pretty(&cards).unwrap(),
    )
}

#[test]
fn criterion_9_replay_determinism() {
    let started = Instant::now();

    // Record the exact-oracle run once, then replay it twice from the
    // fixture file. Outputs must be byte-identical across the replays (and
    // identical to the recording run).
    let recording = Gateway::oracle(pipeline_oracle);
    let recorded_output = full_pipeline(&recording);
    let fixture_text = recording.transcript_ndjson().unwrap();

    let dir = tempfile::tempdir().unwrap();
    let fixture_path = dir.path().join("pipeline.ndjson");
    std::fs::write(&fixture_path, &fixture_text).unwrap();

    let replay_1 = Gateway::replay(ReplayStore::load(&fixture_path).unwrap());
    let output_1 = full_pipeline(&replay_1);
    let replay_2 = Gateway::replay(ReplayStore::load(&fixture_path).unwrap());
    let output_2 = full_pipeline(&replay_2);

    assert_eq!(output_1.as_bytes(), output_2.as_bytes());
    assert_eq!(output_1.as_bytes(), recorded_output.as_bytes());

    finish("9 (replay determinism)", Duration::from_secs(60), started);
}

// --- criterion 10: optional live smoke check ------------------------------

/// Live-mode smoke check, not part of CI. Configure with:
/// `NLAC_LIVE_BASE_URL`, `NLAC_LIVE_MODEL`, `NLAC_API_KEY`, then run
/// `cargo test --test acceptance criterion_10 -- --ignored --nocapture`.
#[test]
#[ignore = "requires a live completion endpoint"]
fn criterion_10_live_mapping_smoke() {
    use nlac_core::benchgen::{score_mapping, Stratum};
    use nlac_core::gateway::LiveConfig;

    let base_url = std::env::var("NLAC_LIVE_BASE_URL").expect("NLAC_LIVE_BASE_URL");
    let model = std::env::var("NLAC_LIVE_MODEL").expect("NLAC_LIVE_MODEL");
    let api_key = std::env::var("NLAC_API_KEY").expect("NLAC_API_KEY");
    let gateway = Gateway::live(LiveConfig::new(base_url, model, api_key));

    // A 10x10 differencing suite in the style of the NL-vs-SQL scenario.
    let matrix = pipeline_matrix();
    let generated = {
        let gw = Gateway::oracle(pipeline_oracle);
        let synthesizer = Synthesizer::new(&gw);
        let outcome = synthesizer.synthesize(&matrix, &pipeline_schema()).unwrap();
        let sandbox = seeded_cars_sandbox();
        for result in execute_script(&outcome.script, &sandbox) {
            assert!(result.is_ok());
        }
        generate_acm(&sandbox.fetch_grants().unwrap(), &sandbox.fetch_inheritance().unwrap())
            .unwrap()
    };

    let differencer = Differencer::new(&gateway);
    let report = differencer.diff(&matrix, &generated).unwrap();
    let predicted: Vec<(usize, usize)> = report
        .match_trace
        .iter()
        .filter(|t| t.right.is_some())
        .enumerate()
        .map(|(k, _)| (k, k))
        .collect();
    let truth: Vec<(usize, usize)> = (0..20).map(|k| (k, k)).collect();
    let card = score_mapping(&predicted, &truth, Stratum::default());
    println!("live role-view mapping F1 = {:.3}", card.f1());
    assert!(card.f1() >= 0.85, "live mapping F1 {:.3} below 0.85", card.f1());
}
