use std::collections::{BTreeMap, HashSet};

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use crate::config::PipelineConfig;
use crate::error::ErrorClass;
use crate::model::SCHEMA_VERSION;
use crate::store::ArtifactRef;
use crate::validate::{Validate, ValidationReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum WorkflowStatus {
    Pending,
    Running,
    Failed,
    Completed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
pub struct ActivityError {
    pub class: ErrorClass,
    pub message: String,
}

/// One attempt of one activity.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
pub struct ActivityEntry {
    pub name: String,
    pub attempt: u32,
    pub input_hash: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<ArtifactRef>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<ActivityError>,
    pub started_at: String,
    pub finished_at: String,
    pub duration_ms: u64,
}

impl ActivityEntry {
    pub fn succeeded(&self) -> bool {
        self.output.is_some()
    }
}

/// Why a workflow stopped.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
pub struct Failure {
    pub activity: String,
    pub attempts: u32,
    pub class: ErrorClass,
    /// Outermost first.
    pub causes: Vec<String>,
}

/// Durable state of one workflow run, persisted after every attempt.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct WorkflowRecord {
    pub schema_version: u32,
    pub workflow_id: String,
    pub project_id: String,
    pub definition: String,
    pub status: WorkflowStatus,
    pub params: BTreeMap<String, String>,
    pub config: PipelineConfig,
    /// Content hash of the project media the run started from.
    pub media_hash: String,
    /// Digest of definition, params, config and media; equal digests are the
    /// same logical run.
    pub input_hash: String,
    /// Activities known so far, in dispatch order. Grows as fan-outs expand.
    pub planned: Vec<String>,
    /// Append-only attempt log.
    pub activities: Vec<ActivityEntry>,
    /// Position in `planned` of the first activity not yet completed.
    pub cursor: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub result: Option<ArtifactRef>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<Failure>,
    pub created_at: String,
    pub updated_at: String,
}

impl WorkflowRecord {
    pub fn completed_names(&self) -> HashSet<&str> {
        self.activities
            .iter()
            .filter(|a| a.succeeded())
            .map(|a| a.name.as_str())
            .collect()
    }

    pub fn recompute_cursor(&mut self) {
        let done = self.completed_names();
        self.cursor = self
            .planned
            .iter()
            .position(|p| !done.contains(p.as_str()))
            .unwrap_or(self.planned.len());
    }

    /// Share of planned activities completed, 0 to 100.
    pub fn percent_complete(&self) -> u32 {
        if self.planned.is_empty() {
            return if self.status == WorkflowStatus::Completed { 100 } else { 0 };
        }
        let done = self.completed_names();
        let n = self.planned.iter().filter(|p| done.contains(p.as_str())).count();
        (n * 100 / self.planned.len()) as u32
    }

    /// Number of attempts recorded for `name`.
    pub fn attempts_of(&self, name: &str) -> usize {
        self.activities.iter().filter(|a| a.name == name).count()
    }

    /// True when `later` extends this record's log without rewriting it.
    pub fn is_prefix_of(&self, later: &WorkflowRecord) -> bool {
        later.activities.len() >= self.activities.len()
            && later.activities[..self.activities.len()] == self.activities[..]
    }
}

impl Validate for WorkflowRecord {
    fn validate(&self) -> ValidationReport {
        let mut r = ValidationReport::default();
        if self.schema_version != SCHEMA_VERSION {
            r.push("schema_version", format!("unsupported schema version {}", self.schema_version));
        }
        if self.workflow_id.is_empty() {
            r.push("workflow_id", "workflow id is empty");
        }
        let planned: HashSet<&str> = self.planned.iter().map(String::as_str).collect();
        for (i, a) in self.activities.iter().enumerate() {
            let path = format!("activities[{i}]");
            if a.attempt == 0 {
                r.push(format!("{path}.attempt"), "attempts count from 1");
            }
            match (&a.output, &a.error) {
                (Some(_), Some(_)) => r.push(path.clone(), "entry has both an output and an error"),
                (None, None) => r.push(path.clone(), "entry has neither an output nor an error"),
                _ => {}
            }
            if !planned.contains(a.name.as_str()) {
                r.push(format!("{path}.name"), format!("activity `{}` is not planned", a.name));
            }
        }
        if self.cursor > self.planned.len() {
            r.push("cursor", "cursor past the end of the plan");
        }
        let done = self.completed_names();
        let all_done = !self.planned.is_empty() && self.planned.iter().all(|p| done.contains(p.as_str()));
        let completed = self.status == WorkflowStatus::Completed;
        if completed && !all_done {
            r.push("status", "completed workflow has incomplete activities");
        }
        if completed && self.result.is_none() {
            r.push("result", "completed workflow has no result");
        }
        if !completed && all_done && self.status != WorkflowStatus::Failed && self.result.is_some() {
            r.push("status", "all activities completed but status is not completed");
        }
        if self.status == WorkflowStatus::Failed && self.failure.is_none() {
            r.push("failure", "failed workflow has no failure cause");
        }
        r
    }
}
