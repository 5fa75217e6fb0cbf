//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    // --- access matrix validation ---
    #[error("duplicate subject {0:?}: each role/user may appear in only one row")]
    DuplicateSubject(String),
    #[error("duplicate asset {0:?}: each table/view may appear in only one column")]
    DuplicateAsset(String),
    #[error("row {row} has {got} cells, expected {expected}")]
    RaggedGrid { row: usize, got: usize, expected: usize },
    #[error("{0} descriptor must not be empty")]
    EmptyDescriptor(&'static str),
    #[error("hierarchy row {row} references subject index {index} outside a {len}-subject matrix")]
    HierarchySubjectOutOfRange { row: usize, index: usize, len: usize },
    #[error("GRANT delegates other operators and cannot stand alone in a privilege set")]
    GrantAlone,
    #[error("unknown operator {0:?}")]
    UnknownOperator(String),
    #[error("cycle in role hierarchy: {0}")]
    HierarchyCycle(String),

    // --- gateway ---
    #[error("unknown prompt template {0:?}")]
    UnknownTemplate(String),
    #[error("template {template:?}: slot {slot:?} not provided")]
    MissingSlot { template: String, slot: String },
    #[error("template {template:?}: candidate list for slot {slot:?} is empty")]
    EmptyCandidates { template: String, slot: String },
    #[error("template {template:?}: no replay fixture entry for digest {digest}")]
    ReplayMiss { template: String, digest: String },
    #[error("template {template:?}: oracle rule table has no answer for this prompt")]
    OracleMiss { template: String },
    #[error("template {template:?}: transport failure after {attempts} attempts: {message}")]
    Transport { template: String, attempts: u32, message: String },
    #[error("gateway config: {0}")]
    GatewayConfig(String),

    // --- sql / synthesis ---
    #[error("sql parse error in {context}: {message}")]
    SqlParse { context: String, message: String },
    #[error("synthesis failed for {context}: {message}")]
    Synthesis { context: String, message: String },
    #[error("view completion did not parse after re-ask; raw response: {raw:?}")]
    UnparseableCompletion { raw: String },
    #[error("role label for {subject:?} is empty after sanitization")]
    EmptyLabel { subject: String },
    #[error("privilege cell ({row}, {col}) is non-empty but no operators were recognized")]
    EmptyPrivilegeAnswer { row: usize, col: usize },
    #[error("literal repair unavailable: {0}")]
    RepairUnavailable(String),

    // --- catalog ---
    #[error("unknown table {0:?}")]
    UnknownTable(String),
    #[error("unknown column {table:?}.{column:?}")]
    UnknownColumn { table: String, column: String },
    #[error("dialect profile {profile:?}: {message}")]
    Dialect { profile: String, message: String },
    #[error("sandbox: {0}")]
    Sandbox(String),

    // --- deployment pipeline ---
    #[error("execution graph cycle involving steps {0}")]
    GraphCycle(String),
    #[error("instruction file line {line}: {message}")]
    Instructions { line: usize, message: String },
    #[error("unsupported requirement shape for table {0:?}")]
    UnsupportedRequirement(String),
    #[error("policy bundle: {0}")]
    Bundle(String),

    // --- config / io ---
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}
