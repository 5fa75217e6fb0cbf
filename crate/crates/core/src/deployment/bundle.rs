//! Policy bundles: a directory of policy tables plus per-table
//! documentation, optional human instructions, and extraction queries.
//!
//! Layout:
//!
//! ```text
//! bundle/
//!   tables/01_privileges.json       # matrix, hierarchy list, or opaque grid
//!   tables/02_hierarchy.csv
//!   docs/01_privileges.txt          # documentation, matched by file stem
//!   instructions.txt                # optional human instructions
//!   extraction_queries.json         # label -> extraction query
//!   bundle.json                     # optional { "backend": "postgres" }
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::acm::{load_matrix_csv, load_matrix_json, load_rhl_csv, load_rhl_json, AccessMatrix, RoleHierarchyList};
use crate::error::{Error, Result};

/// A table that is neither a matrix nor a hierarchy list, carried as-is.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpaqueTable {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

/// One policy table, shape-classified at load time from its structure.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PolicyTable {
    Matrix(AccessMatrix),
    Hierarchy(RoleHierarchyList),
    Opaque(OpaqueTable),
}

impl PolicyTable {
    /// Plain-text rendering for prompt slots.
    pub fn render(&self) -> String {
        match self {
            PolicyTable::Matrix(matrix) => {
                let mut out = String::from("Role");
                for asset in matrix.assets() {
                    out.push_str(" | ");
                    out.push_str(&asset.raw);
                }
                out.push('\n');
                for (i, subject) in matrix.subjects().iter().enumerate() {
                    out.push_str(&subject.raw);
                    for j in 0..matrix.cols() {
                        out.push_str(" | ");
                        out.push_str(matrix.cell(i, j).raw());
                    }
                    out.push('\n');
                }
                out
            }
            PolicyTable::Hierarchy(rhl) => {
                let mut out = String::from("Role | Parent | Child\n");
                for row in rhl.rows() {
                    out.push_str(&format!(
                        "{} | {} | {}\n",
                        row.role.raw,
                        row.parent.as_ref().map(|p| p.raw.as_str()).unwrap_or(""),
                        row.child.as_ref().map(|c| c.raw.as_str()).unwrap_or(""),
                    ));
                }
                out
            }
            PolicyTable::Opaque(table) => {
                let mut out = table.columns.join(" | ");
                out.push('\n');
                for row in &table.rows {
                    out.push_str(&row.join(" | "));
                    out.push('\n');
                }
                out
            }
        }
    }
}

/// Policies, their documentation, and the target backend.
#[derive(Debug, Clone)]
pub struct PolicyBundle {
    pub tables: Vec<PolicyTable>,
    pub docs: Vec<String>,
    pub backend: String,
    pub instructions: Option<String>,
    pub extraction_queries: super::ExtractionQuerySet,
}

#[derive(Deserialize)]
struct BundleConfig {
    #[serde(default = "default_backend")]
    backend: String,
}

fn default_backend() -> String {
    "postgres".to_string()
}

/// Load a bundle directory. Table files sort by name; docs match by stem.
pub fn load_bundle(dir: &Path) -> Result<PolicyBundle> {
    let tables_dir = dir.join("tables");
    if !tables_dir.is_dir() {
        return Err(Error::Bundle(format!("{} has no tables/ directory", dir.display())));
    }
    let mut entries: Vec<_> = std::fs::read_dir(&tables_dir)?
        .collect::<std::io::Result<Vec<_>>>()?
        .into_iter()
        .map(|e| e.path())
        .filter(|p| p.is_file())
        .collect();
    entries.sort();
    if entries.is_empty() {
        return Err(Error::Bundle("bundle has no policy tables".into()));
    }

    let mut tables = Vec::new();
    let mut docs = Vec::new();
    for path in &entries {
        tables.push(load_table(path)?);
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default();
        let doc_path = dir.join("docs").join(format!("{stem}.txt"));
        docs.push(std::fs::read_to_string(doc_path).unwrap_or_default());
    }

    let instructions = std::fs::read_to_string(dir.join("instructions.txt")).ok();
    let extraction_queries = match std::fs::read(dir.join("extraction_queries.json")) {
        Ok(bytes) => super::ExtractionQuerySet::from_json(&bytes)?,
        Err(_) => super::ExtractionQuerySet::default(),
    };
    let backend = match std::fs::read(dir.join("bundle.json")) {
        Ok(bytes) => serde_json::from_slice::<BundleConfig>(&bytes)?.backend,
        Err(_) => default_backend(),
    };

    Ok(PolicyBundle { tables, docs, backend, instructions, extraction_queries })
}

/// Classify and load one table file by structure.
pub fn load_table(path: &Path) -> Result<PolicyTable> {
    let bytes = std::fs::read(path)?;
    let extension = path.extension().and_then(|e| e.to_str()).unwrap_or_default();
    let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or("table").to_string();
    match extension {
        "json" => {
            let value: serde_json::Value = serde_json::from_slice(&bytes)?;
            if value.get("subjects").is_some() {
                return Ok(PolicyTable::Matrix(load_matrix_json(&bytes)?.matrix));
            }
            if value.as_array().is_some_and(|rows| {
                rows.iter().all(|r| r.get("role").is_some())
            }) {
                return Ok(PolicyTable::Hierarchy(load_rhl_json(&bytes)?));
            }
            let table: OpaqueTable = serde_json::from_slice(&bytes)
                .unwrap_or_else(|_| OpaqueTable { name: name.clone(), ..Default::default() });
            Ok(PolicyTable::Opaque(OpaqueTable { name, ..table }))
        }
        "csv" => {
            let header = String::from_utf8_lossy(&bytes);
            let header = header.lines().next().unwrap_or_default().to_lowercase();
            let headers: Vec<&str> = header.split(',').map(str::trim).collect();
            if headers.contains(&"role") && (headers.contains(&"child") || headers.contains(&"parent"))
            {
                Ok(PolicyTable::Hierarchy(load_rhl_csv(&bytes)?))
            } else {
                Ok(PolicyTable::Matrix(load_matrix_csv(&bytes)?.matrix))
            }
        }
        other => Err(Error::Bundle(format!("unsupported table format: {other:?}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundle_directory_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path();
        std::fs::create_dir_all(root.join("tables")).unwrap();
        std::fs::create_dir_all(root.join("docs")).unwrap();
        std::fs::write(
            root.join("tables/01_privileges.json"),
            br#"{"subjects": ["analyst"], "assets": ["customer"], "cells": [["SELECT"]]}"#,
        )
        .unwrap();
        std::fs::write(root.join("tables/02_hierarchy.csv"), b"role,parent,child\nceo,,analyst\n")
            .unwrap();
        std::fs::write(root.join("docs/01_privileges.txt"), b"permitted operators per role")
            .unwrap();
        std::fs::write(root.join("instructions.txt"), b"1. do things [tables: 1]\n").unwrap();
        std::fs::write(
            root.join("extraction_queries.json"),
            br#"{"privileges": {"kind": "table_grants"}}"#,
        )
        .unwrap();

        let bundle = load_bundle(root).unwrap();
        assert_eq!(bundle.tables.len(), 2);
        assert_eq!(bundle.docs.len(), 2);
        assert!(matches!(bundle.tables[0], PolicyTable::Matrix(_)));
        assert!(matches!(bundle.tables[1], PolicyTable::Hierarchy(_)));
        assert_eq!(bundle.docs[0], "permitted operators per role");
        assert_eq!(bundle.docs[1], "");
        assert!(bundle.instructions.is_some());
        assert_eq!(bundle.backend, "postgres");
        assert_eq!(bundle.extraction_queries.queries.len(), 1);
    }

    #[test]
    fn write_queries_are_rejected() {
        let err = super::super::ExtractionQuerySet::from_json(
            br#"{"bad": {"kind": "sql", "query": "DELETE FROM t"}}"#,
        )
        .unwrap_err();
        assert!(err.to_string().contains("read-only"), "{err}");
    }

    #[test]
    fn table_render_is_prompt_friendly() {
        let table = PolicyTable::Matrix(
            AccessMatrix::from_raw(vec!["analyst"], vec!["customer"], vec![vec!["SELECT"]])
                .unwrap(),
        );
        let rendered = table.render();
        assert!(rendered.contains("Role | customer"));
        assert!(rendered.contains("analyst | SELECT"));
    }
}
