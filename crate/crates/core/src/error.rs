use thiserror::Error;

use crate::domain_model::ValidationReport;

/// Errors raised by engine operations and document loaders.
///
/// Every variant maps to a stable upper-case code (see [`Error::code`]) that
/// the CLI and the HTTP service surface verbatim.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("unknown concept `{0}`")]
    UnknownConcept(String),
    #[error("unknown learning outcome `{0}`")]
    UnknownLo(String),
    #[error("concept `{id}` differs between merged models: {detail}")]
    MergeConflict { id: String, detail: String },
    #[error("merged prerequisite graph contains a cycle: {}", .0.join(" -> "))]
    MergeCycle(Vec<String>),
    #[error("model is invalid: {}", summarize(.0))]
    Invalid(ValidationReport),
    #[error("response option {index} out of range for item `{item}` ({options} options)")]
    BadResponse { item: String, index: usize, options: usize },
    #[error("evidence for item `{item}` at {timestamp} already recorded")]
    DuplicateEvidence { item: String, timestamp: String },
    #[error("no items available for learning outcome `{0}`")]
    NoItems(String),
    #[error("no unasked item remains inside the open level interval")]
    Exhausted,
    #[error("item `{got}` is not the pending item{}", .expected.as_deref().map(|e| format!(" (`{e}`)")).unwrap_or_default())]
    WrongItem { expected: Option<String>, got: String },
    #[error("session is no longer active")]
    SessionClosed,
    #[error("invalid parameter: {0}")]
    BadParameter(String),
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("schema error at {path}: {message}")]
    Schema { path: String, message: String },
    #[error("unsupported schema version `{0}`")]
    Version(String),
}

fn summarize(report: &ValidationReport) -> String {
    report
        .errors()
        .map(|f| format!("{} ({})", f.code, f.subject))
        .collect::<Vec<_>>()
        .join(", ")
}

impl Error {
    pub fn code(&self) -> &'static str {
        match self {
            Error::UnknownConcept(_) => "UNKNOWN_CONCEPT",
            Error::UnknownLo(_) => "UNKNOWN_LO",
            Error::MergeConflict { .. } => "MERGE_CONFLICT",
            Error::MergeCycle(_) => "MERGE_CYCLE",
            Error::Invalid(_) => "VALIDATION_ERROR",
            Error::BadResponse { .. } => "BAD_RESPONSE",
            Error::DuplicateEvidence { .. } => "DUPLICATE_EVIDENCE",
            Error::NoItems(_) => "NO_ITEMS",
            Error::Exhausted => "EXHAUSTED",
            Error::WrongItem { .. } => "WRONG_ITEM",
            Error::SessionClosed => "SESSION_CLOSED",
            Error::BadParameter(_) => "BAD_PARAMETER",
            Error::Parse { .. } => "PARSE_ERROR",
            Error::Schema { .. } => "SCHEMA_ERROR",
            Error::Version(_) => "VERSION_ERROR",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
