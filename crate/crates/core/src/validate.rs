//! Invariant checking for persisted artifacts.
//!
//! Validation is total: any value that deserializes produces a report, never
//! a panic. An empty report means the artifact is valid.

use std::fmt;

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use crate::canonical::from_json_bytes;
use crate::error::Result;
use crate::model::{EditPlan, NarrativeIndex};
use crate::orchestrator::WorkflowRecord;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
pub struct Violation {
    /// Dotted path to the offending field, e.g. `scenes[3].annotations[0].at`.
    pub path: String,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn push(&mut self, path: impl Into<String>, message: impl Into<String>) {
        self.violations.push(Violation {
            path: path.into(),
            message: message.into(),
        });
    }

    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn merge(&mut self, prefix: &str, other: ValidationReport) {
        for v in other.violations {
            let path = if v.path.is_empty() {
                prefix.to_string()
            } else if prefix.is_empty() {
                v.path
            } else {
                format!("{prefix}.{}", v.path)
            };
            self.violations.push(Violation { path, ..v });
        }
    }

    pub fn into_result(self) -> Result<()> {
        if self.is_empty() {
            Ok(())
        } else {
            Err(crate::Error::Validation(self))
        }
    }

    pub fn mentions(&self, needle: &str) -> bool {
        self.violations.iter().any(|v| v.message.contains(needle))
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let lines: Vec<String> = self
            .violations
            .iter()
            .map(|v| format!("{}: {}", v.path, v.message))
            .collect();
        f.write_str(&lines.join("; "))
    }
}

/// Implemented by every artifact type that carries invariants.
pub trait Validate {
    fn validate(&self) -> ValidationReport;
}

/// Artifact families with a published schema.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemaKind {
    NarrativeIndex,
    EditPlan,
    WorkflowRecord,
}

/// Parses serialized bytes as `kind` and reports every violated invariant.
///
/// Malformed JSON (or JSON of the wrong shape) yields [`crate::Error::Parse`]
/// with the byte offset of the failure.
pub fn validate_bytes(kind: SchemaKind, bytes: &[u8]) -> Result<ValidationReport> {
    Ok(match kind {
        SchemaKind::NarrativeIndex => from_json_bytes::<NarrativeIndex>(bytes)?.validate(),
        SchemaKind::EditPlan => from_json_bytes::<EditPlan>(bytes)?.validate(),
        SchemaKind::WorkflowRecord => from_json_bytes::<WorkflowRecord>(bytes)?.validate(),
    })
}
