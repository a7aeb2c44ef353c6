use std::path::PathBuf;

use thiserror::Error;

use crate::gateway::Attempt;
use crate::validate::ValidationReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at byte {offset}: {message}")]
    Parse { offset: usize, message: String },

    #[error("validation failed: {0}")]
    Validation(ValidationReport),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("cannot probe media {uri}: {reason}")]
    MediaProbe { uri: String, reason: String },

    #[error("media has zero duration")]
    EmptyMedia,

    #[error("media engine `{tool}` failed: {diagnostics}")]
    Engine { tool: String, diagnostics: String },

    #[error("render graph error: {0}")]
    Graph(String),

    #[error("structured output for {kind} still invalid after {} attempts: {}", attempts.len(), attempts.last().map(|a| a.error.as_deref().unwrap_or("")).unwrap_or(""))]
    StructuredOutput { kind: String, attempts: Vec<Attempt> },

    #[error("model provider error: {0}")]
    Provider(String),

    #[error("token budget exceeded: {0}")]
    Budget(String),

    #[error("timestamp out of range: {0}")]
    Range(String),

    #[error("index coverage gap: {0}")]
    IndexCoverage(String),

    #[error("no clips retrieved for section {0}")]
    Retrieval(String),

    #[error("not found: {0}")]
    NotFound(String),

    #[error("integrity check failed for {path}: expected {expected}, found {actual}")]
    Integrity {
        path: PathBuf,
        expected: String,
        actual: String,
    },

    #[error("storage error: {0}")]
    Store(String),

    #[error("unknown workflow definition `{0}`")]
    Definition(String),

    #[error("checkpoint is stale: {0}")]
    HashMismatch(String),

    #[error("workflow conflict: {0}")]
    Conflict(String),

    /// Raised by fault injection to emulate a worker crash. The workflow record
    /// is left in `Running` so that it can be resumed.
    #[error("worker killed after activity {0}")]
    Killed(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Coarse classification used by retry policies and the HTTP surface.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize, schemars::JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum ErrorClass {
    Provider,
    Engine,
    Store,
    Validation,
    Precondition,
    NotFound,
    Other,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Provider(_) => ErrorClass::Provider,
            Error::Engine { .. } => ErrorClass::Engine,
            Error::Store(_) | Error::Io(_) => ErrorClass::Store,
            Error::Validation(_) | Error::Parse { .. } | Error::StructuredOutput { .. } => {
                ErrorClass::Validation
            }
            Error::Precondition(_) | Error::EmptyMedia => ErrorClass::Precondition,
            Error::NotFound(_) => ErrorClass::NotFound,
            _ => ErrorClass::Other,
        }
    }

    pub fn store(e: impl std::fmt::Display) -> Self {
        Error::Store(e.to_string())
    }

    /// Maps a serde_json error to a [`Error::Parse`] with a byte offset into `src`.
    pub fn parse(src: &[u8], e: &serde_json::Error) -> Self {
        Error::Parse {
            offset: byte_offset(src, e.line(), e.column()),
            message: e.to_string(),
        }
    }
}

fn byte_offset(src: &[u8], line: usize, column: usize) -> usize {
    if line == 0 {
        return 0;
    }
    let line_start = src
        .split_inclusive(|b| *b == b'\n')
        .take(line - 1)
        .map(<[u8]>::len)
        .sum::<usize>();
    (line_start + column.saturating_sub(1)).min(src.len())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_error_reports_byte_offset() {
        let src = b"{\n  \"a\": 1,\n  \"b\": ]\n}";
        let err = serde_json::from_slice::<serde_json::Value>(src).unwrap_err();
        match Error::parse(src, &err) {
            Error::Parse { offset, .. } => assert_eq!(src[offset], b']'),
            other => panic!("unexpected {other:?}"),
        }
    }
}
