//! Serializable views shared by the CLI and HTTP surfaces, and the mapping
//! from errors to exit codes and status codes.

use serde::Serialize;
use serde_json::{json, Value};

use reelmind_core::orchestrator::{EditResult, Failure, WorkflowRecord, WorkflowStatus};
use reelmind_core::store::{ArtifactRef, ArtifactStore};
use reelmind_core::validate::ValidationReport;
use reelmind_core::{Error, ErrorClass};

/// Workflow progress as reported by `status` and `GET /workflows/{id}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WorkflowView {
    pub workflow_id: String,
    pub project_id: String,
    pub definition: String,
    pub status: WorkflowStatus,
    pub percent_complete: u32,
    pub completed_activities: usize,
    pub planned_activities: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failure: Option<Failure>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub result: Option<ArtifactRef>,
    /// The result artifact inlined, for question answering and edits.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<Value>,
    /// Where the rendered edit can be fetched over HTTP.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub download_uri: Option<String>,
}

impl WorkflowView {
    pub fn new(store: &ArtifactStore, record: &WorkflowRecord) -> Self {
        let done = record.completed_names();
        let completed = record.planned.iter().filter(|p| done.contains(p.as_str())).count();
        let output = match (&record.result, record.definition.as_str()) {
            (Some(r), "qa" | "edit") => store.get_json::<Value>(r).ok(),
            _ => None,
        };
        let download_uri = output
            .as_ref()
            .filter(|_| record.definition == "edit")
            .and_then(|v| serde_json::from_value::<EditResult>(v.clone()).ok())
            .map(|e| artifact_path(&e.render.artifact));
        Self {
            workflow_id: record.workflow_id.clone(),
            project_id: record.project_id.clone(),
            definition: record.definition.clone(),
            status: record.status,
            percent_complete: record.percent_complete(),
            completed_activities: completed,
            planned_activities: record.planned.len(),
            failure: record.failure.clone(),
            result: record.result.clone(),
            output,
            download_uri,
        }
    }

    pub fn summary(&self) -> String {
        let mut s = format!(
            "{} {} {:?} {}% ({}/{} activities)",
            self.workflow_id,
            self.definition,
            self.status,
            self.percent_complete,
            self.completed_activities,
            self.planned_activities
        )
        .to_lowercase();
        if let Some(f) = &self.failure {
            s.push_str(&format!("\nfailed in {} after {} attempt(s)", f.activity, f.attempts));
            for c in &f.causes {
                s.push_str(&format!("\n  {c}"));
            }
        }
        s
    }
}

/// HTTP path of a specific artifact version.
pub fn artifact_path(r: &ArtifactRef) -> String {
    format!("/projects/{}/artifacts/{}?hash={}", r.project, r.kind, r.hash)
}

/// Mistakes the caller can fix, as opposed to failures of the system or
/// its providers.
pub fn is_user_error(e: &Error) -> bool {
    matches!(
        e,
        Error::Validation(_)
            | Error::Parse { .. }
            | Error::Precondition(_)
            | Error::EmptyMedia
            | Error::MediaProbe { .. }
            | Error::NotFound(_)
            | Error::Definition(_)
            | Error::Conflict(_)
            | Error::HashMismatch(_)
    )
}

pub fn exit_code(e: &Error) -> u8 {
    if is_user_error(e) {
        1
    } else {
        2
    }
}

/// Exit code for a workflow that ran to an end state.
pub fn record_exit_code(record: &WorkflowRecord) -> u8 {
    match (&record.status, &record.failure) {
        (WorkflowStatus::Completed, _) => 0,
        (_, Some(f)) if matches!(f.class, ErrorClass::Precondition | ErrorClass::NotFound) => 1,
        _ => 2,
    }
}

/// The validation report an error amounts to, for 422 responses.
pub fn as_report(e: &Error) -> ValidationReport {
    match e {
        Error::Validation(r) => r.clone(),
        other => {
            let mut r = ValidationReport::default();
            r.push("request", other.to_string());
            r
        }
    }
}

pub fn error_json(e: &Error) -> Value {
    match e {
        Error::Validation(r) => json!({ "error": e.to_string(), "class": e.class(), "violations": r.violations }),
        _ => json!({ "error": e.to_string(), "class": e.class() }),
    }
}
