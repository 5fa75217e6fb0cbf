//! The three shipped role-hierarchy tree shapes, modeled on real
//! employee-manager structures: a deep chain-heavy tree, a wide two-level
//! tree, and a balanced tree. Shipped as fixtures rather than re-derived
//! from raw data.

use crate::acm::{CellText, HierarchyRow, RoleHierarchyList};

fn rows_from_edges(edges: &[(&str, &str)]) -> RoleHierarchyList {
    let parent_of = |node: &str| edges.iter().find(|(_, c)| *c == node).map(|(p, _)| *p);
    let mut order: Vec<&str> = Vec::new();
    for (p, c) in edges {
        if !order.contains(p) {
            order.push(p);
        }
        if !order.contains(c) {
            order.push(c);
        }
    }
    let mut rows = Vec::new();
    for node in order {
        let children: Vec<&str> =
            edges.iter().filter(|(p, _)| *p == node).map(|(_, c)| *c).collect();
        let parent = parent_of(node);
        if children.is_empty() {
            rows.push(HierarchyRow {
                role: CellText::nl(node),
                parent: parent.map(CellText::nl),
                child: None,
            });
        } else {
            for child in children {
                rows.push(HierarchyRow {
                    role: CellText::nl(node),
                    parent: parent.map(CellText::nl),
                    child: Some(CellText::nl(child)),
                });
            }
        }
    }
    RoleHierarchyList::new(rows).expect("fixture trees are acyclic")
}

/// Deep tree: 16 nodes, 12 leaves, a four-manager reporting chain.
pub fn deep_tree() -> RoleHierarchyList {
    rows_from_edges(&[
        ("Chief Executive Officer", "Executive Assistant"),
        ("Chief Executive Officer", "General Counsel"),
        ("Chief Executive Officer", "Chief of Staff"),
        ("Chief Executive Officer", "Vice President of Engineering"),
        ("Vice President of Engineering", "Technical Program Manager"),
        ("Vice President of Engineering", "Engineering Recruiter"),
        ("Vice President of Engineering", "Budget Analyst"),
        ("Vice President of Engineering", "Director of Platform Engineering"),
        ("Director of Platform Engineering", "Site Reliability Engineer"),
        ("Director of Platform Engineering", "Release Coordinator"),
        ("Director of Platform Engineering", "Security Engineer"),
        ("Director of Platform Engineering", "Platform Engineering Manager"),
        ("Platform Engineering Manager", "Senior Backend Developer"),
        ("Platform Engineering Manager", "Backend Developer"),
        ("Platform Engineering Manager", "Platform Engineering Intern"),
    ])
}

/// Wide tree: 19 nodes in 2 levels, 1 root and 18 leaves.
pub fn wide_tree() -> RoleHierarchyList {
    let leaves = [
        "Accountant",
        "Office Manager",
        "Sales Representative",
        "Marketing Coordinator",
        "Customer Support Agent",
        "Data Analyst",
        "Software Developer",
        "Quality Assurance Tester",
        "Human Resources Generalist",
        "Payroll Specialist",
        "Procurement Officer",
        "Logistics Coordinator",
        "Facilities Technician",
        "Receptionist",
        "Graphic Designer",
        "Content Writer",
        "Systems Administrator",
        "Legal Assistant",
    ];
    let edges: Vec<(&str, &str)> =
        leaves.iter().map(|leaf| ("Chief Executive Officer", *leaf)).collect();
    rows_from_edges(&edges)
}

/// Balanced tree: 12 nodes, leaves at depth 3 or 4.
pub fn balanced_tree() -> RoleHierarchyList {
    rows_from_edges(&[
        ("Chief Executive Officer", "Vice President of Sales"),
        ("Chief Executive Officer", "Vice President of Marketing"),
        ("Chief Executive Officer", "Vice President of Operations"),
        ("Vice President of Sales", "Regional Sales Manager"),
        ("Vice President of Sales", "Account Executive"),
        ("Vice President of Sales", "Sales Development Representative"),
        ("Vice President of Marketing", "Brand Manager"),
        ("Vice President of Marketing", "Marketing Analyst"),
        ("Vice President of Operations", "Director of Supply Chain"),
        ("Director of Supply Chain", "Inventory Planner"),
        ("Director of Supply Chain", "Warehouse Supervisor"),
    ])
}

/// Structural shape of a tree fixture.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TreeStats {
    pub nodes: usize,
    pub leaves: usize,
    /// Longest root-to-leaf path, counted in nodes.
    pub levels: usize,
}

pub fn tree_stats(tree: &RoleHierarchyList) -> TreeStats {
    let edges = tree.child_edges();
    let roles = tree.roles();
    let nodes = roles.len();
    let leaves = roles
        .iter()
        .filter(|r| !edges.iter().any(|(p, _)| *p == r.raw))
        .count();
    fn depth(node: &str, edges: &[(&str, &str)]) -> usize {
        1 + edges
            .iter()
            .filter(|(p, _)| *p == node)
            .map(|(_, c)| depth(c, edges))
            .max()
            .unwrap_or(0)
    }
    let roots: Vec<&str> = roles
        .iter()
        .map(|r| r.raw.as_str())
        .filter(|r| !edges.iter().any(|(_, c)| c == r))
        .collect();
    let levels = roots.iter().map(|r| depth(r, &edges)).max().unwrap_or(0);
    TreeStats { nodes, leaves, levels }
}
