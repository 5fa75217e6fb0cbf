//! The prompt-template catalog.
//!
//! Each template body carries named `{slot}` placeholders. Candidate-list
//! slots render as numbered entries in input order.

/// What shape of answer a template expects, which decides how callers parse
/// the completion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AnswerShape {
    FreeText,
    CandidateChoice,
    CandidateSubset,
    YesNo,
    OperatorList,
    SqlCompletion,
}

#[derive(Debug, Clone, Copy)]
pub struct PromptTemplate {
    pub id: &'static str,
    pub body: &'static str,
    pub shape: AnswerShape,
}

/// Every template the pipelines use. Slot names are stable; rendering with a
/// missing slot is an error.
pub const TEMPLATES: &[PromptTemplate] = &[
    // --- synthesis ---
    PromptTemplate {
        id: "view_completion",
        body: "Complete postgres SQL statement only and with no explanation, and do not grant privileges on tables, roles, and users that are not explicitly requested in the statement.\nDatabase schema: {schema}\n{context}-- {description}\nCREATE VIEW",
        shape: AnswerShape::SqlCompletion,
    },
    PromptTemplate {
        id: "view_completion_retry",
        body: "Complete postgres SQL statement only and with no explanation, and do not grant privileges on tables, roles, and users that are not explicitly requested in the statement.\nDatabase schema: {schema}\n{context}-- {description}\n-- Your previous completion was not valid SQL: {previous}\nCREATE VIEW",
        shape: AnswerShape::SqlCompletion,
    },
    PromptTemplate {
        id: "privilege_map",
        body: "Consider the following statement: {statement}. According to this, which of the database operations SELECT, UPDATE/INSERT, DELETE, CREATE, GRANT are permitted for role {role} on table/view {view}?",
        shape: AnswerShape::OperatorList,
    },
    PromptTemplate {
        id: "role_label",
        body: "Consider the following role description {description}. What role does this describe?",
        shape: AnswerShape::FreeText,
    },
    // --- differencing: role/view mapping ---
    PromptTemplate {
        id: "nl_vs_sql_view",
        body: "Which database table or view from the list {list} does this phrase {phrase} most likely describe? Begin your answer with this table/view.",
        shape: AnswerShape::CandidateChoice,
    },
    PromptTemplate {
        id: "nl_vs_nl_view",
        body: "Which database table or view description from the list {list} most likely describes the same table or view as this phrase {phrase}? Begin your answer with your chosen description from the list.",
        shape: AnswerShape::CandidateChoice,
    },
    PromptTemplate {
        id: "nl_vs_sql_role",
        body: "Which database role from the list {list} does this phrase {phrase} most likely describe?",
        shape: AnswerShape::CandidateChoice,
    },
    PromptTemplate {
        id: "nl_vs_nl_role",
        body: "Which database role description from the list {list} most likely describes the same role as this phrase {phrase}?",
        shape: AnswerShape::CandidateChoice,
    },
    PromptTemplate {
        id: "privilege_exceeds",
        body: "Consider the following privileges described by a policy: {policy}. Consider the following privileges granted by an implementation: {implementation}. Does the second set of privileges exceed the first? Begin your answer with yes or no.",
        shape: AnswerShape::YesNo,
    },
    // --- hierarchy: similarity join ---
    PromptTemplate {
        id: "role_subset_match",
        body: "Consider the following role description {phrase}. List all roles from the list of role descriptions {list} that describe the same role as {phrase}.",
        shape: AnswerShape::CandidateSubset,
    },
    PromptTemplate {
        id: "role_pair_audit",
        body: "Consider the following descriptions of a database role: {left}, {right}. These roles are drawn from a database with roles {left_roles}, {right_roles}. Do these describe the same role?",
        shape: AnswerShape::YesNo,
    },
    PromptTemplate {
        id: "child_label",
        body: "Consider the following role {role_label} described as {role_description}. {role_description} inherits privileges from a role described by {child_description}. {child_description} describes one role in the following set: {list}. What is the best label for this description?",
        shape: AnswerShape::CandidateChoice,
    },
    PromptTemplate {
        id: "parent_label",
        body: "Consider the following role {role_label} described as {role_description}. A role described by {parent_description} inherits privileges from {role_description}. {parent_description} describes one role in the following set: {list}. What is the best label for this description?",
        shape: AnswerShape::CandidateChoice,
    },
    // --- generalized pipeline ---
    PromptTemplate {
        id: "requirement_identify",
        body: "Consider the following table: {table}. Consider the given documentation describing this table: {documentation}. What category of deployment information does this represent?",
        shape: AnswerShape::FreeText,
    },
    PromptTemplate {
        id: "deployment_instructions",
        body: "You are a database security analyst. Your job is to make sure excessive access privileges are not granted to anyone. Consider the following tables representing deployment policies: {labels}, {tables}. Consider the following documentation for these tables: {documentation}. Write a set of instructions for implementing these policies on a {backend} backend.",
        shape: AnswerShape::FreeText,
    },
    PromptTemplate {
        id: "instructions_tables_followup",
        body: "For each step in the instructions, which policy tables from {labels} are needed?\nInstructions:\n{instructions}",
        shape: AnswerShape::FreeText,
    },
    PromptTemplate {
        id: "instructions_deps_followup",
        body: "For each step in the instructions, list the previous steps whose outputs will be needed for this step.\nInstructions:\n{instructions}",
        shape: AnswerShape::FreeText,
    },
    PromptTemplate {
        id: "generalized_synthesis",
        body: "Implement the following deployment constraints in database backend {backend}: Requirements: {requirements} Documentation Describing the Tables: {documentation}, Instructions for implementation: {instructions}. Also make sure to use the following schema information, where applicable: Database Schema: {schema}, Schema information: {schema_info}. Generate the required SQL statements.",
        shape: AnswerShape::SqlCompletion,
    },
    PromptTemplate {
        id: "synthesis_feedback",
        body: "{previous_prompt}\nThe previously generated SQL statements were:\n{previous_code}\nChecking them against the database found these errors:\n{errors}\nGenerate the required SQL statements again, correcting these errors.",
        shape: AnswerShape::SqlCompletion,
    },
];

pub fn lookup(id: &str) -> Option<&'static PromptTemplate> {
    TEMPLATES.iter().find(|t| t.id == id)
}
