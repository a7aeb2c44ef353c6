use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use super::{format_label, lenient_format, Scratchpad, SegmentSummary};
use crate::error::{Error, Result};
use crate::gateway::{Gateway, ModelRequest, PromptKind, Rejection};
use crate::model::{CharacterEdge, CharacterGraph, CharacterNode, GlobalSynopsis, PlotPoint};

/// Draft synopsis and character graph produced at the end of the coarse pass.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
pub struct GlobalScaffold {
    pub draft_synopsis: GlobalSynopsis,
    pub draft_graph: CharacterGraph,
    /// One per macro segment, in temporal order.
    pub segment_summaries: Vec<SegmentSummary>,
    #[serde(default)]
    pub warnings: Vec<String>,
}

/// Parses `A -> B: relationship`.
pub fn parse_adjacency_line(line: &str) -> Option<(String, String, String)> {
    let (from, rest) = line.split_once("->")?;
    let (to, label) = rest.split_once(':')?;
    let (from, to, label) = (from.trim(), to.trim(), label.trim());
    if from.is_empty() || to.is_empty() || label.is_empty() {
        return None;
    }
    Some((from.to_string(), to.to_string(), label.to_string()))
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default)]
struct SynopsisDraft {
    media_format: String,
    setting: String,
    premise: String,
    plot_points: Vec<PlotPoint>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default)]
struct ScaffoldDraft {
    synopsis: SynopsisDraft,
    characters: Vec<CharacterNode>,
    adjacency: Vec<String>,
}

/// Drafts the global synopsis and adjacency-map character graph.
///
/// Adjacency lines that do not parse or reference unknown characters trigger
/// a repair; on the last attempt they are dropped and recorded as warnings.
pub fn build_global_scaffold(
    summaries: &[SegmentSummary],
    scratchpad: &Scratchpad,
    gateway: &Gateway,
) -> Result<GlobalScaffold> {
    if summaries.is_empty() {
        return Err(Error::Precondition("scaffold needs at least one segment summary".into()));
    }
    let summary_text: Vec<String> = summaries
        .iter()
        .map(|s| format!("[{} - {}] {}", s.range.start, s.range.end, s.text))
        .collect();
    let request = ModelRequest::new(PromptKind::DraftScaffold)
        .block("scratchpad", scratchpad.render())
        .block("segment_summaries", summary_text.join("\n"));
    let last_attempt = 1 + gateway.repair_attempts();

    let (scaffold, _) = gateway.complete_json(&request, |draft: ScaffoldDraft, attempt| {
        if draft.synopsis.plot_points.iter().all(|p| p.text.trim().is_empty()) {
            return Err(Rejection::Retry("synopsis.plot_points must be non-empty".into()));
        }
        let mut graph = CharacterGraph::default();
        for node in draft.characters {
            let name = node.name.trim().to_string();
            if name.is_empty() || graph.contains(&name) {
                continue;
            }
            graph.nodes.push(CharacterNode { name, ..node });
        }
        let mut problems = Vec::new();
        for line in draft.adjacency.iter().filter(|l| !l.trim().is_empty()) {
            let Some((from, to, relationship)) = parse_adjacency_line(line) else {
                problems.push(format!("adjacency line `{line}` is not `A -> B: relationship`"));
                continue;
            };
            match (graph.resolve(&from), graph.resolve(&to)) {
                (Some(f), Some(t)) => {
                    let edge = CharacterEdge {
                        from: f.to_string(),
                        to: t.to_string(),
                        relationship,
                        evidence: Vec::new(),
                    };
                    if !graph.edges.contains(&edge) {
                        graph.edges.push(edge);
                    }
                }
                (f, _) => {
                    let unknown = if f.is_none() { from } else { to };
                    problems.push(format!("adjacency line `{line}` references unknown character `{unknown}`"));
                }
            }
        }
        if !problems.is_empty() && attempt < last_attempt {
            return Err(Rejection::Retry(problems.join("; ")));
        }
        let warnings = problems.into_iter().map(|p| format!("dropped {p}")).collect();
        let format = if draft.synopsis.media_format.trim().is_empty() {
            scratchpad.media_format
        } else {
            lenient_format(&draft.synopsis.media_format)
        };
        Ok(GlobalScaffold {
            draft_synopsis: GlobalSynopsis {
                media_format: format,
                setting: non_empty(draft.synopsis.setting, &scratchpad.setting),
                premise: non_empty(draft.synopsis.premise, &scratchpad.premise),
                plot_points: draft
                    .synopsis
                    .plot_points
                    .into_iter()
                    .filter(|p| !p.text.trim().is_empty())
                    .map(|p| PlotPoint { text: p.text, range: None })
                    .collect(),
            },
            draft_graph: graph,
            segment_summaries: summaries.to_vec(),
            warnings,
        })
    })?;
    tracing::debug!(
        format = format_label(scaffold.draft_synopsis.media_format),
        characters = scaffold.draft_graph.nodes.len(),
        "scaffold drafted"
    );
    Ok(scaffold)
}

fn non_empty(s: String, fallback: &str) -> String {
    if s.trim().is_empty() {
        fallback.to_string()
    } else {
        s
    }
}

