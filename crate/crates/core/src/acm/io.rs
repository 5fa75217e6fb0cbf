//! Matrix and hierarchy-list serialization.
//!
//! JSON is the canonical format: explicit kind tags on every header plus an
//! optional hierarchy annex. CSV import covers hand-authored policies; kinds
//! are inferred there.

use serde::{Deserialize, Serialize};

use super::{
    AccessMatrix, CellText, ExtendedAccessMatrix, HierarchyAnnotation, HierarchyRow,
    PrivilegeCell, RoleHierarchyList, TextKind,
};
use crate::error::{Error, Result};

/// A matrix plus its optional hierarchy annex, as stored on disk.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MatrixDocument {
    pub matrix: AccessMatrix,
    pub hierarchy: Option<RoleHierarchyList>,
}

impl MatrixDocument {
    pub fn bare(matrix: AccessMatrix) -> Self {
        MatrixDocument { matrix, hierarchy: None }
    }

    /// Attach the annex to subjects by exact role-text match, producing an
    /// extended matrix. Annex rows naming no subject are attached nowhere;
    /// that is the equijoin contract for implementation-side matrices, where
    /// role texts coincide by construction.
    pub fn into_extended(self) -> ExtendedAccessMatrix {
        let MatrixDocument { matrix, hierarchy } = self;
        let mut annotations = vec![Vec::new(); matrix.rows()];
        if let Some(rhl) = hierarchy {
            for row in rhl.rows() {
                if let Some(idx) = matrix.subjects().iter().position(|s| s.raw == row.role.raw) {
                    annotations[idx].push(HierarchyAnnotation {
                        source_role: row.role.clone(),
                        parent: row.parent.clone(),
                        child: row.child.clone(),
                    });
                }
            }
        }
        ExtendedAccessMatrix { matrix, hierarchy: annotations }
    }
}

#[derive(Serialize)]
struct HeaderOut<'a> {
    text: &'a str,
    kind: TextKind,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum HeaderIn {
    Bare(String),
    Tagged { text: String, kind: Option<TextKind> },
}

impl HeaderIn {
    fn into_cell_text(self) -> CellText {
        match self {
            HeaderIn::Bare(text) => CellText::new(text),
            HeaderIn::Tagged { text, kind: Some(kind) } => CellText::with_kind(text, kind),
            HeaderIn::Tagged { text, kind: None } => CellText::new(text),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct AnnexRowJson {
    role: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    parent: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    child: Option<String>,
}

#[derive(Deserialize)]
struct MatrixJsonIn {
    subjects: Vec<HeaderIn>,
    assets: Vec<HeaderIn>,
    cells: Vec<Vec<String>>,
    #[serde(default)]
    hierarchy: Option<Vec<AnnexRowJson>>,
}

#[derive(Serialize)]
struct MatrixJsonOut<'a> {
    subjects: Vec<HeaderOut<'a>>,
    assets: Vec<HeaderOut<'a>>,
    cells: Vec<Vec<&'a str>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    hierarchy: Option<Vec<AnnexRowJson>>,
}

/// Load a matrix document from JSON bytes, validating all matrix invariants.
pub fn load_matrix_json(bytes: &[u8]) -> Result<MatrixDocument> {
    let parsed: MatrixJsonIn = serde_json::from_slice(bytes)?;
    let subjects: Vec<CellText> = parsed.subjects.into_iter().map(HeaderIn::into_cell_text).collect();
    let assets: Vec<CellText> = parsed.assets.into_iter().map(HeaderIn::into_cell_text).collect();
    let cells: Vec<Vec<PrivilegeCell>> = parsed
        .cells
        .into_iter()
        .map(|row| row.into_iter().map(PrivilegeCell::new).collect())
        .collect();
    let matrix = AccessMatrix::new(subjects, assets, cells)?;
    let hierarchy = match parsed.hierarchy {
        None => None,
        Some(rows) => Some(RoleHierarchyList::new(
            rows.into_iter()
                .map(|r| HierarchyRow {
                    role: CellText::new(r.role),
                    parent: r.parent.map(CellText::new),
                    child: r.child.map(CellText::new),
                })
                .collect(),
        )?),
    };
    Ok(MatrixDocument { matrix, hierarchy })
}

/// Serialize a matrix document to canonical JSON (explicit kind tags).
/// `load_matrix_json(save_matrix_json(d))` is identity.
pub fn save_matrix_json(doc: &MatrixDocument) -> Result<String> {
    let out = MatrixJsonOut {
        subjects: doc
            .matrix
            .subjects()
            .iter()
            .map(|s| HeaderOut { text: &s.raw, kind: s.kind })
            .collect(),
        assets: doc
            .matrix
            .assets()
            .iter()
            .map(|a| HeaderOut { text: &a.raw, kind: a.kind })
            .collect(),
        cells: doc
            .matrix
            .cells()
            .iter()
            .map(|row| row.iter().map(|c| c.raw()).collect())
            .collect(),
        hierarchy: doc.hierarchy.as_ref().map(|rhl| {
            rhl.rows()
                .iter()
                .map(|r| AnnexRowJson {
                    role: r.role.raw.clone(),
                    parent: r.parent.as_ref().map(|p| p.raw.clone()),
                    child: r.child.as_ref().map(|c| c.raw.clone()),
                })
                .collect()
        }),
    };
    Ok(serde_json::to_string_pretty(&out)?)
}

/// Load a matrix from CSV bytes: first row holds asset texts (first cell
/// blank), first column holds subject texts, body cells are privileges.
/// Kinds are inferred; short rows are padded with empty cells.
pub fn load_matrix_csv(bytes: &[u8]) -> Result<MatrixDocument> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(bytes);
    let mut records = reader.records();
    let header = match records.next() {
        Some(rec) => rec?,
        None => {
            return Ok(MatrixDocument::bare(AccessMatrix::new(vec![], vec![], vec![])?));
        }
    };
    let assets: Vec<CellText> = header.iter().skip(1).map(CellText::new).collect();
    let mut subjects = Vec::new();
    let mut cells = Vec::new();
    for rec in records {
        let rec = rec?;
        let mut fields = rec.iter();
        let subject = fields.next().unwrap_or("");
        subjects.push(CellText::new(subject));
        let mut row: Vec<PrivilegeCell> = fields.map(PrivilegeCell::new).collect();
        row.resize(assets.len(), PrivilegeCell::empty());
        cells.push(row);
    }
    Ok(MatrixDocument::bare(AccessMatrix::new(subjects, assets, cells)?))
}

#[derive(Deserialize)]
struct RhlRowJson {
    role: String,
    #[serde(default)]
    parent: Option<String>,
    #[serde(default)]
    child: Option<String>,
}

/// Load a role-hierarchy list from a JSON array of row objects.
pub fn load_rhl_json(bytes: &[u8]) -> Result<RoleHierarchyList> {
    let rows: Vec<RhlRowJson> = serde_json::from_slice(bytes)?;
    RoleHierarchyList::new(
        rows.into_iter()
            .map(|r| HierarchyRow {
                role: CellText::new(r.role),
                parent: r.parent.filter(|s| !s.trim().is_empty()).map(CellText::new),
                child: r.child.filter(|s| !s.trim().is_empty()).map(CellText::new),
            })
            .collect(),
    )
}

/// Load a role-hierarchy list from CSV with `role,parent,child` headers.
pub fn load_rhl_csv(bytes: &[u8]) -> Result<RoleHierarchyList> {
    let mut reader = csv::ReaderBuilder::new().flexible(true).from_reader(bytes);
    let headers = reader.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h.trim().eq_ignore_ascii_case(name));
    let role_col = col("role").ok_or_else(|| Error::Config("RHL CSV is missing a 'role' column".into()))?;
    let parent_col = col("parent");
    let child_col = col("child");
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec?;
        let get = |idx: Option<usize>| {
            idx.and_then(|i| rec.get(i))
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(CellText::new)
        };
        rows.push(HierarchyRow {
            role: get(Some(role_col)).ok_or(Error::EmptyDescriptor("role"))?,
            parent: get(parent_col),
            child: get(child_col),
        });
    }
    RoleHierarchyList::new(rows)
}
