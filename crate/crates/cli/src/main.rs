//! Command-line front door: synthesize SQL from access matrices, generate
//! matrices from database state, difference policy against implementation,
//! join hierarchies, drive the generalized pipeline, and build or score
//! benchmarks.
//!
//! Exit codes are a stable contract for CI: 0 success/compliant, 1
//! violations or cell failures found, 2 pipeline error.

mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::RunConfig;
use nlac_core::acm::{
    load_matrix_csv, load_matrix_json, load_rhl_csv, load_rhl_json, MatrixDocument,
    RoleHierarchyList,
};
use nlac_core::benchgen::{
    self, build_triple, load_corpus, replay_counts, score_mapping, PerturbationSpec, Stratum,
};
use nlac_core::catalog::{generate_acm, CatalogTarget, EmbeddedSandbox};
use nlac_core::deployment::{
    self, apply_revisions, audit_generalized, extract_implementation, identify_requirement,
    resolve_dependencies, resolve_dependencies_llm, synthesize_generalized, ExtractionQuery,
    HierarchyUnionHook, RevisionHook,
};
use nlac_core::differencer::Differencer;
use nlac_core::gateway::{Gateway, LiveConfig, ReplayStore};
use nlac_core::hierarchy::{audit_matches, bipartite_match, build_extended_matrix};
use nlac_core::synthesizer::{SchemaContext, Synthesizer};
use nlac_core::{Error, Result};

#[derive(Parser)]
#[command(name = "nlac", version, about = "Natural-language access control toolkit")]
struct Cli {
    /// Config file ([gateway]/[pipeline] sections).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Replay fixture file (newline-delimited JSON); selects the replay
    /// backend.
    #[arg(long, global = true)]
    fixtures: Option<PathBuf>,
    /// Allow live gateway calls. Without this flag nothing is ever spent.
    #[arg(long, global = true)]
    live: bool,
    /// Record the completion transcript to this path (replayable later).
    #[arg(long, global = true)]
    record: Option<PathBuf>,
    /// Seed for benchmark construction.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Max in-flight live calls.
    #[arg(long, global = true)]
    parallelism: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compile an access matrix into a SQL script plus a synthesis report.
    Synthesize {
        #[arg(long)]
        matrix: PathBuf,
        #[arg(long)]
        schema: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Introspect a target's catalog into an all-SQL access matrix.
    Generate {
        #[arg(long)]
        target: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Difference a policy matrix against an implementation matrix or a
    /// live target (generate-then-diff).
    Diff {
        #[arg(long)]
        policy: PathBuf,
        #[arg(long, conflicts_with = "target")]
        implementation: Option<PathBuf>,
        #[arg(long)]
        target: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Similarity-join an access matrix with a role-hierarchy list.
    Join {
        #[arg(long)]
        matrix: PathBuf,
        #[arg(long)]
        rhl: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the generalized multi-requirement pipeline over a policy bundle.
    Deploy {
        #[arg(long)]
        bundle: PathBuf,
        #[arg(long)]
        schema: PathBuf,
        #[arg(long)]
        target: String,
        #[arg(long)]
        out: PathBuf,
        /// Resolve step dependencies with the gateway instead of the
        /// bundle's instructions file.
        #[arg(long)]
        llm_deps: bool,
    },
    /// Benchmark construction and scoring.
    Bench {
        #[command(subcommand)]
        command: BenchCommand,
    },
}

#[derive(Subcommand)]
enum BenchCommand {
    /// Build a base/SQL/perturbed matrix triple from a corpus.
    Build {
        /// JSON list of {nl, sql, category?}.
        #[arg(long)]
        corpus: PathBuf,
        /// JSON list of role texts.
        #[arg(long)]
        roles: PathBuf,
        /// Perturbation spec JSON; identity when omitted.
        #[arg(long)]
        perturbation: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Difference two members of a triple and score the mapping against the
    /// identity alignment.
    Run {
        #[arg(long)]
        triple: PathBuf,
        /// "comparison" (base vs perturbed) or "auditing" (base vs sql).
        #[arg(long, default_value = "comparison")]
        scenario: String,
        #[arg(long, default_value = "")]
        database: String,
        #[arg(long, default_value = "")]
        perturbation: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Rebuild scorecards from recorded confusion counts.
    Score {
        #[arg(long)]
        recorded: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    let config = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let gateway = build_gateway(&cli, &config)?;

    let code = match &cli.command {
        Command::Synthesize { matrix, schema, out } => cmd_synthesize(&gateway, matrix, schema, out)?,
        Command::Generate { target, out } => cmd_generate(target, out)?,
        Command::Diff { policy, implementation, target, out } => {
            cmd_diff(&gateway, policy, implementation.as_deref(), target.as_deref(), out)?
        }
        Command::Join { matrix, rhl, out } => cmd_join(&gateway, matrix, rhl, out)?,
        Command::Deploy { bundle, schema, target, out, llm_deps } => {
            cmd_deploy(&gateway, &config, bundle, schema, target, out, *llm_deps)?
        }
        Command::Bench { command } => cmd_bench(&gateway, &cli, command)?,
    };

    if let Some(path) = &cli.record {
        std::fs::write(path, gateway.transcript_ndjson()?)?;
    }
    Ok(code)
}

fn build_gateway(cli: &Cli, config: &RunConfig) -> Result<Gateway> {
    if let Some(fixtures) = &cli.fixtures {
        return Ok(Gateway::replay(ReplayStore::load(fixtures)?));
    }
    if cli.live || config.backend == "live" {
        if !cli.live {
            return Err(Error::GatewayConfig(
                "config selects the live backend but --live was not passed".into(),
            ));
        }
        if config.base_url.is_empty() || config.model.is_empty() {
            return Err(Error::GatewayConfig(
                "live mode needs base_url and model in the [gateway] config".into(),
            ));
        }
        let api_key = std::env::var(&config.api_key_env).map_err(|_| {
            Error::GatewayConfig(format!("environment variable {} is not set", config.api_key_env))
        })?;
        let mut live = LiveConfig::new(&config.base_url, &config.model, api_key);
        live.parallelism = cli.parallelism.unwrap_or(config.parallelism);
        return Ok(Gateway::live(live));
    }
    // Offline default: an empty replay store. Any completion attempt is a
    // replay miss, so nothing can be spent by accident.
    Ok(Gateway::replay(ReplayStore::default()))
}

fn load_matrix_document(path: &Path) -> Result<MatrixDocument> {
    let bytes = std::fs::read(path)?;
    match path.extension().and_then(|e| e.to_str()) {
        Some("csv") => load_matrix_csv(&bytes),
        _ => load_matrix_json(&bytes),
    }
}

fn load_rhl(path: &Path) -> Result<RoleHierarchyList> {
    let bytes = std::fs::read(path)?;
    match path.extension().and_then(|e| e.to_str()) {
        Some("csv") => load_rhl_csv(&bytes),
        _ => load_rhl_json(&bytes),
    }
}

/// `sandbox:` or `sandbox:<script.sql>` builds an embedded instance,
/// optionally bootstrapped by a script file.
fn open_target(spec: &str) -> Result<EmbeddedSandbox> {
    let Some(rest) = spec.strip_prefix("sandbox:") else {
        return Err(Error::Config(format!(
            "unsupported target {spec:?}; use sandbox:<bootstrap.sql> or sandbox:"
        )));
    };
    let sandbox = EmbeddedSandbox::new()?;
    if !rest.is_empty() {
        let script = std::fs::read_to_string(rest)?;
        for result in sandbox.execute_all(&script) {
            if let Some(error) = result.error {
                return Err(Error::Sandbox(format!(
                    "bootstrap statement {} failed: {error}",
                    result.index
                )));
            }
        }
    }
    Ok(sandbox)
}

fn write(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(path, contents)?;
    Ok(())
}

fn cmd_synthesize(gateway: &Gateway, matrix: &Path, schema: &Path, out: &Path) -> Result<ExitCode> {
    let document = load_matrix_document(matrix)?;
    let schema = SchemaContext::from_json(&std::fs::read(schema)?)?;
    let synthesizer = Synthesizer::new(gateway);
    let outcome = synthesizer.synthesize(&document.matrix, &schema)?;
    write(&out.join("script.sql"), &outcome.script.render())?;
    write(&out.join("synthesis_report.json"), &serde_json::to_string_pretty(&outcome.report)?)?;
    println!(
        "synthesized {} statements, {} cell failures",
        outcome.script.statements().len(),
        outcome.failed_cells()
    );
    Ok(if outcome.failed_cells() == 0 { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn cmd_generate(target: &str, out: &Path) -> Result<ExitCode> {
    let sandbox = open_target(target)?;
    let grants = sandbox.fetch_grants()?;
    let inheritance = sandbox.fetch_inheritance()?;
    let matrix = generate_acm(&grants, &inheritance)?;
    let annex = inheritance_annex(&inheritance)?;
    let document = MatrixDocument { matrix, hierarchy: annex };
    write(out, &nlac_core::acm::save_matrix_json(&document)?)?;
    println!("generated matrix written to {}", out.display());
    Ok(ExitCode::SUCCESS)
}

fn inheritance_annex(
    records: &[nlac_core::catalog::InheritanceRecord],
) -> Result<Option<RoleHierarchyList>> {
    if records.is_empty() {
        return Ok(None);
    }
    use nlac_core::acm::{CellText, HierarchyRow};
    let rows = records
        .iter()
        .map(|r| HierarchyRow {
            role: CellText::sql(&r.parent),
            parent: None,
            child: Some(CellText::sql(&r.child)),
        })
        .collect();
    Ok(Some(RoleHierarchyList::new(rows)?))
}

fn cmd_diff(
    gateway: &Gateway,
    policy: &Path,
    implementation: Option<&Path>,
    target: Option<&str>,
    out: &Path,
) -> Result<ExitCode> {
    let policy_doc = load_matrix_document(policy)?;

    let impl_doc = match (implementation, target) {
        (Some(path), None) => load_matrix_document(path)?,
        (None, Some(spec)) => {
            let sandbox = open_target(spec)?;
            let grants = sandbox.fetch_grants()?;
            let inheritance = sandbox.fetch_inheritance()?;
            MatrixDocument {
                matrix: generate_acm(&grants, &inheritance)?,
                hierarchy: inheritance_annex(&inheritance)?,
            }
        }
        _ => {
            return Err(Error::Config(
                "diff needs exactly one of --implementation or --target".into(),
            ))
        }
    };

    let comparison_sandbox = EmbeddedSandbox::new()?;
    let differencer = Differencer::with_sandbox(gateway, &comparison_sandbox);
    let report = if policy_doc.hierarchy.is_some() || impl_doc.hierarchy.is_some() {
        differencer.diff_extended(&policy_doc.into_extended(), &impl_doc.into_extended())?
    } else {
        differencer.diff(&policy_doc.matrix, &impl_doc.matrix)?
    };

    write(&out.join("report.json"), &serde_json::to_string_pretty(&report)?)?;
    write(&out.join("report.txt"), &report.render())?;
    print!("{}", report.render());
    Ok(if report.is_empty() { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn cmd_join(gateway: &Gateway, matrix: &Path, rhl: &Path, out: &Path) -> Result<ExitCode> {
    let document = load_matrix_document(matrix)?;
    let rhl = load_rhl(rhl)?;
    let m_roles = document.matrix.subjects().to_vec();
    let l_roles: Vec<nlac_core::acm::CellText> = rhl.roles().into_iter().cloned().collect();
    let outcome = bipartite_match(gateway, &m_roles, &l_roles)?;
    if let Some(cursor) = outcome.resume_at {
        return Err(Error::Synthesis {
            context: "similarity join".into(),
            message: format!(
                "gateway failed at left role {cursor}: {}",
                outcome.error.unwrap_or_default()
            ),
        });
    }
    let findings = audit_matches(gateway, &outcome.matches, &m_roles, &l_roles)?;
    let extended = build_extended_matrix(&document.matrix, &rhl, &outcome.matches)?;

    write(&out.join("extended.json"), &serde_json::to_string_pretty(&extended)?)?;
    write(&out.join("matches.json"), &serde_json::to_string_pretty(outcome.matches.pairs())?)?;
    write(&out.join("findings.json"), &serde_json::to_string_pretty(&findings)?)?;
    println!(
        "joined {} matches, {} findings for review",
        outcome.matches.pairs().len(),
        findings.suspect_pairs.len()
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_deploy(
    gateway: &Gateway,
    config: &RunConfig,
    bundle_dir: &Path,
    schema: &Path,
    target: &str,
    out: &Path,
    llm_deps: bool,
) -> Result<ExitCode> {
    let bundle = deployment::load_bundle(bundle_dir)?;
    let schema = SchemaContext::from_json(&std::fs::read(schema)?)?;
    let sandbox = open_target(target)?;

    let mut labels = Vec::new();
    for (table, doc) in bundle.tables.iter().zip(&bundle.docs) {
        labels.push(identify_requirement(gateway, table, doc)?);
    }

    let graph = if llm_deps {
        resolve_dependencies_llm(gateway, &bundle, &labels)?
    } else {
        let instructions = bundle.instructions.clone().ok_or_else(|| {
            Error::Bundle(
                "bundle has no instructions.txt; pass --llm-deps to resolve with the gateway"
                    .into(),
            )
        })?;
        resolve_dependencies(&bundle, &labels, &instructions)?
    };

    let synthesis =
        synthesize_generalized(gateway, &bundle, &schema, &graph, &sandbox, config.feedback_rounds)?;
    write(&out.join("code.sql"), &synthesis.code)?;
    write(&out.join("steps.json"), &serde_json::to_string_pretty(&synthesis.steps)?)?;

    let results = sandbox.execute_all(&synthesis.code);
    let failures = results.iter().filter(|r| !r.is_ok()).count();
    write(&out.join("execution.json"), &serde_json::to_string_pretty(&results)?)?;
    if failures > 0 {
        eprintln!("{failures} statements failed to execute; see execution.json");
        return Ok(ExitCode::from(2));
    }

    let extracted = extract_implementation(&bundle.extraction_queries, &sandbox)?;
    let hook = hierarchy_union_hook(&bundle.extraction_queries);
    let hooks: Vec<&dyn RevisionHook> = hook.iter().map(|h| h as &dyn RevisionHook).collect();
    let revised = apply_revisions(&extracted, &hooks)?;

    let mut any_violation = false;
    let mut audits = serde_json::Map::new();
    for (index, label) in labels.iter().enumerate() {
        if let Some(impl_table) = revised.tables.get(label) {
            let report = audit_generalized(gateway, &bundle.tables[index], impl_table)?;
            any_violation |= !report.is_empty();
            audits.insert(label.clone(), serde_json::to_value(&report)?);
        }
    }
    write(&out.join("audit.json"), &serde_json::to_string_pretty(&audits)?)?;
    println!(
        "deployment: {} steps, {} statements, audits {}",
        synthesis.steps.len(),
        results.len(),
        if any_violation { "found violations" } else { "clean" }
    );
    Ok(if any_violation { ExitCode::from(1) } else { ExitCode::SUCCESS })
}

/// When the bundle extracts both table grants and role memberships, the
/// built-in hierarchy-union revision runs over those two labels.
fn hierarchy_union_hook(queries: &deployment::ExtractionQuerySet) -> Option<HierarchyUnionHook> {
    let mut privileges = None;
    let mut hierarchy = None;
    for (label, query) in &queries.queries {
        match query {
            ExtractionQuery::TableGrants => privileges = Some(label.clone()),
            ExtractionQuery::RoleMemberships => hierarchy = Some(label.clone()),
            _ => {}
        }
    }
    Some(HierarchyUnionHook { privileges_label: privileges?, hierarchy_label: hierarchy? })
}

fn cmd_bench(gateway: &Gateway, cli: &Cli, command: &BenchCommand) -> Result<ExitCode> {
    match command {
        BenchCommand::Build { corpus, roles, perturbation, out } => {
            let corpus = load_corpus(&std::fs::read(corpus)?)?;
            let roles: Vec<String> = serde_json::from_slice(&std::fs::read(roles)?)?;
            let spec = match perturbation {
                Some(path) => PerturbationSpec::from_json(&std::fs::read(path)?)?,
                None => PerturbationSpec::identity(),
            };
            let triple = build_triple(&corpus, &roles, &spec, cli.seed)?;
            for (name, matrix) in [
                ("base.json", &triple.base),
                ("sql.json", &triple.sql),
                ("perturbed.json", &triple.perturbed),
            ] {
                let document = MatrixDocument { matrix: matrix.clone(), hierarchy: None };
                write(&out.join(name), &nlac_core::acm::save_matrix_json(&document)?)?;
            }
            println!("triple written to {}", out.display());
            Ok(ExitCode::SUCCESS)
        }
        BenchCommand::Run { triple, scenario, database, perturbation, out } => {
            let base = load_matrix_document(&triple.join("base.json"))?.matrix;
            let second = match scenario.as_str() {
                "comparison" => load_matrix_document(&triple.join("perturbed.json"))?.matrix,
                "auditing" => load_matrix_document(&triple.join("sql.json"))?.matrix,
                other => {
                    return Err(Error::Config(format!(
                        "unknown scenario {other:?}; use comparison or auditing"
                    )))
                }
            };
            let sandbox = EmbeddedSandbox::new()?;
            let differencer = Differencer::with_sandbox(gateway, &sandbox);
            let report = differencer.diff(&base, &second)?;

            let cols = base.cols();
            let subject_of = |raw: &str, m: &nlac_core::acm::AccessMatrix| {
                m.subjects().iter().position(|s| s.raw == raw)
            };
            let asset_of = |raw: &str, m: &nlac_core::acm::AccessMatrix| {
                m.assets().iter().position(|a| a.raw == raw)
            };
            let matched_roles: Vec<(usize, usize)> = report
                .match_trace
                .iter()
                .filter(|t| t.item_kind == "role")
                .filter_map(|t| {
                    Some((subject_of(&t.left, &base)?, subject_of(t.right.as_ref()?, &second)?))
                })
                .collect();
            let matched_views: Vec<(usize, usize)> = report
                .match_trace
                .iter()
                .filter(|t| t.item_kind == "view")
                .filter_map(|t| {
                    Some((asset_of(&t.left, &base)?, asset_of(t.right.as_ref()?, &second)?))
                })
                .collect();
            let mut predicted: Vec<(usize, usize)> = Vec::new();
            for &(ri, rj) in &matched_roles {
                for &(vi, vj) in &matched_views {
                    predicted.push((ri * cols + vi, rj * cols + vj));
                }
            }
            let truth: Vec<(usize, usize)> = (0..base.rows() * cols).map(|k| (k, k)).collect();
            let card = score_mapping(
                &predicted,
                &truth,
                Stratum { database: database.clone(), perturbation: perturbation.clone() },
            );
            write(&out.join("report.json"), &serde_json::to_string_pretty(&report)?)?;
            write(&out.join("scorecard.json"), &serde_json::to_string_pretty(&card)?)?;
            println!(
                "mapping F1 {:.3} (precision {:.3}, recall {:.3})",
                card.f1(),
                card.precision(),
                card.recall()
            );
            Ok(ExitCode::SUCCESS)
        }
        BenchCommand::Score { recorded, out } => {
            let records: Vec<benchgen::RecordedCounts> =
                serde_json::from_slice(&std::fs::read(recorded)?)?;
            let cards = replay_counts(&records);
            write(&out.join("scorecards.json"), &serde_json::to_string_pretty(&cards)?)?;
            let mut csv_text = String::from(
                "database,perturbation,true_positives,false_positives,false_negatives,precision,recall,f1,f1_error\n",
            );
            for card in &cards {
                csv_text.push_str(&format!(
                    "{},{},{},{},{},{:.6},{:.6},{:.6},{:.6}\n",
                    card.stratum.database,
                    card.stratum.perturbation,
                    card.true_positives,
                    card.false_positives,
                    card.false_negatives,
                    card.precision(),
                    card.recall(),
                    card.f1(),
                    card.f1_error()
                ));
            }
            write(&out.join("scorecards.csv"), &csv_text)?;
            println!("{} scorecards written to {}", cards.len(), out.display());
            Ok(ExitCode::SUCCESS)
        }
    }
}
