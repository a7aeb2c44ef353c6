//! Operations behind both surfaces. The CLI and the HTTP handlers call these
//! with the same arguments, so they persist the same artifacts.

use std::collections::BTreeMap;

use reelmind_core::orchestrator::WorkflowRecord;
use reelmind_core::Result;

use crate::workspace::Workspace;

pub fn index_params(refine: bool) -> BTreeMap<String, String> {
    BTreeMap::from([("refine".to_string(), refine.to_string())])
}

pub fn qa_params(question: &str) -> BTreeMap<String, String> {
    BTreeMap::from([("question".to_string(), question.to_string())])
}

pub fn edit_params(prompt: &str) -> BTreeMap<String, String> {
    BTreeMap::from([("prompt".to_string(), prompt.to_string())])
}

/// Starts a workflow unless an identical one is already running.
pub fn launch(ws: &Workspace, project: &str, definition: &str, params: BTreeMap<String, String>) -> Result<String> {
    ws.orchestrator(project)?.start_exclusive(project, definition, params)
}

/// Starts one edit per variant. A single variant goes through the same
/// duplicate check as every other launch.
pub fn launch_edit(ws: &Workspace, project: &str, prompt: &str, variants: usize) -> Result<Vec<String>> {
    if variants <= 1 {
        return Ok(vec![launch(ws, project, "edit", edit_params(prompt))?]);
    }
    ws.orchestrator(project)?.fork_variants(project, &vec![prompt.to_string(); variants])
}

pub fn wait_all(ws: &Workspace, ids: &[String]) -> Result<Vec<WorkflowRecord>> {
    ids.iter().map(|id| ws.wait(id)).collect()
}
