use std::collections::BTreeMap;

use serde::Deserialize;

use super::{range_line, synopsis_text, GlobalScaffold, SceneDraft};
use crate::config::PipelineConfig;
use crate::error::{Error, Result};
use crate::exec::{self, ExecMode};
use crate::gateway::{Gateway, ModelRequest, PromptKind, Rejection};
use crate::model::{
    CharacterEdge, CharacterGraph, CharacterNode, IndexMeta, MediaAsset, NarrativeIndex, PlotPoint,
    SceneTrace, SCHEMA_VERSION, UNATTRIBUTED,
};
use crate::time::Timestamp;
use crate::validate::Validate;

/// Annotation texts per scene included in the synopsis-level digest.
const DIGEST_ANNOTATIONS: usize = 3;
const DIGEST_CHARS: usize = 160;

fn sorted_drafts(drafts: &[SceneDraft]) -> Vec<&SceneDraft> {
    let mut v: Vec<&SceneDraft> = drafts.iter().collect();
    v.sort_by_key(|d| d.trace.range.start);
    v
}

fn check_coverage(traces: &[SceneTrace], duration: Timestamp) -> Result<()> {
    let gaps = NarrativeIndex::coverage_gaps(traces, duration);
    if gaps.is_empty() {
        return Ok(());
    }
    let list: Vec<String> = gaps.iter().map(ToString::to_string).collect();
    Err(Error::IndexCoverage(format!("coverage gap > 1 s at {}", list.join(", "))))
}

fn finish(mut index: NarrativeIndex) -> Result<NarrativeIndex> {
    index.seal();
    index.validate().into_result()?;
    Ok(index)
}

/// Direct assembly of scaffold and traces, with no refinement calls.
pub fn assemble_index(
    project_id: &str,
    asset: &MediaAsset,
    scaffold: &GlobalScaffold,
    drafts: &[SceneDraft],
    model: &str,
    config: &PipelineConfig,
    created_at: &str,
) -> Result<NarrativeIndex> {
    let drafts = sorted_drafts(drafts);
    let scenes: Vec<SceneTrace> = drafts.iter().map(|d| d.trace.clone()).collect();
    check_coverage(&scenes, asset.duration)?;
    let mut warnings = scaffold.warnings.clone();
    warnings.extend(drafts.iter().flat_map(|d| d.warnings.iter().cloned()));
    finish(NarrativeIndex {
        schema_version: SCHEMA_VERSION,
        project_id: project_id.to_string(),
        synopsis: scaffold.draft_synopsis.clone(),
        characters: scaffold.draft_graph.clone(),
        scenes,
        meta: IndexMeta {
            asset_id: asset.asset_id.clone(),
            media_duration: asset.duration,
            config: config.clone(),
            model: model.to_string(),
            refinement_enabled: false,
            created_at: created_at.to_string(),
            content_hash: String::new(),
            warnings,
        },
    })
}

#[derive(Debug, Clone, Deserialize)]
struct EdgeDraft {
    from: String,
    to: String,
    relationship: String,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default)]
struct SynopsisRefinement {
    plot_points: Vec<PlotPoint>,
    characters: Vec<CharacterNode>,
    edges: Vec<EdgeDraft>,
}

#[derive(Debug, Clone, Deserialize)]
struct Attribution {
    at: Timestamp,
    speaker: String,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default)]
struct AttributionAnswer {
    attributions: Vec<Attribution>,
}

fn scene_digest(drafts: &[&SceneDraft]) -> String {
    let mut out = String::new();
    for d in drafts {
        let texts: Vec<String> = d
            .trace
            .annotations
            .iter()
            .take(DIGEST_ANNOTATIONS)
            .map(|a| a.text().chars().take(DIGEST_CHARS).collect())
            .collect();
        out.push_str(&format!(
            "{} {}: {}\n",
            d.trace.scene_id,
            range_line(&d.trace.range),
            texts.join(" / ")
        ));
    }
    out
}

/// Synopsis-level pass: plot points with ranges, missing characters, new edges.
fn refine_synopsis(
    scaffold: &GlobalScaffold,
    drafts: &[&SceneDraft],
    duration: Timestamp,
    gateway: &Gateway,
) -> Result<(Vec<PlotPoint>, CharacterGraph, Vec<String>)> {
    let mut heard: Vec<&str> = drafts
        .iter()
        .flat_map(|d| d.unresolved.iter().map(|u| u.heard.as_str()))
        .filter(|h| !h.is_empty() && *h != UNATTRIBUTED)
        .collect();
    heard.sort();
    heard.dedup();
    let request = ModelRequest::new(PromptKind::Refine)
        .block("synopsis", synopsis_text(&scaffold.draft_synopsis))
        .block("character_graph", scaffold.draft_graph.adjacency_text())
        .block("unresolved_speakers", heard.join("\n"))
        .block("scene_digest", scene_digest(drafts));

    let (out, _) = gateway.complete_json(&request, |r: SynopsisRefinement, _| {
        let points: Vec<PlotPoint> = r
            .plot_points
            .into_iter()
            .filter(|p| !p.text.trim().is_empty())
            .collect();
        if points.is_empty() {
            return Err(Rejection::Retry("plot_points must be non-empty".into()));
        }
        let bad: Vec<String> = points
            .iter()
            .filter_map(|p| p.range)
            .filter(|r| !r.is_well_formed() || r.end > duration)
            .map(|r| r.to_string())
            .collect();
        if !bad.is_empty() {
            return Err(Rejection::Retry(format!(
                "plot point ranges {} must be well formed and end by {duration}",
                bad.join(", ")
            )));
        }
        let mut graph = scaffold.draft_graph.clone();
        let mut warnings = Vec::new();
        for node in r.characters {
            let name = node.name.trim().to_string();
            if !name.is_empty() && !graph.contains(&name) {
                graph.nodes.push(CharacterNode { name, ..node });
            }
        }
        for e in r.edges {
            match (graph.resolve(&e.from), graph.resolve(&e.to)) {
                (Some(f), Some(t)) => {
                    let edge = CharacterEdge {
                        from: f.to_string(),
                        to: t.to_string(),
                        relationship: e.relationship,
                        evidence: Vec::new(),
                    };
                    if !graph.edges.contains(&edge) {
                        graph.edges.push(edge);
                    }
                }
                _ => warnings.push(format!(
                    "refinement dropped edge {} -> {}: unknown character",
                    e.from, e.to
                )),
            }
        }
        Ok((points, graph, warnings))
    })?;
    Ok(out)
}

/// Per-scene pass: re-attributes `unattributed` lines to graph characters.
fn refine_scene(
    draft: &SceneDraft,
    graph: &CharacterGraph,
    gateway: &Gateway,
) -> Result<(SceneTrace, Vec<String>)> {
    let mut trace = draft.trace.clone();
    if trace.unattributed_count() == 0 {
        return Ok((trace, Vec::new()));
    }
    let heard_at: BTreeMap<Timestamp, &str> =
        draft.unresolved.iter().map(|u| (u.at, u.heard.as_str())).collect();
    let mut lines = format!(
        "scene_id: {}\n{}\nunattributed:\n",
        trace.scene_id,
        range_line(&trace.range)
    );
    for a in trace.annotations.iter().filter(|a| a.is_unattributed()) {
        let heard = heard_at.get(&a.at).copied().filter(|h| !h.is_empty()).unwrap_or("?");
        let said = a.dialogue.as_ref().map_or("", |d| d.text.as_str());
        lines.push_str(&format!("- {} | heard: {heard} | {said}\n", a.at));
    }
    let request = ModelRequest::new(PromptKind::Refine)
        .block("character_graph", graph.adjacency_text())
        .block("scene", lines);
    let last_attempt = 1 + gateway.repair_attempts();
    let open: Vec<Timestamp> = trace
        .annotations
        .iter()
        .filter(|a| a.is_unattributed())
        .map(|a| a.at)
        .collect();

    let ((fixes, warnings), _) = gateway.complete_json(&request, |r: AttributionAnswer, attempt| {
        let mut fixes = Vec::new();
        let mut problems = Vec::new();
        for a in r.attributions {
            if !open.contains(&a.at) {
                problems.push(format!("{} is not an unattributed line", a.at));
            } else if let Some(name) = graph.resolve(&a.speaker) {
                fixes.push((a.at, name.to_string()));
            } else {
                problems.push(format!("speaker `{}` at {} is not in the graph", a.speaker, a.at));
            }
        }
        if !problems.is_empty() && attempt < last_attempt {
            return Err(Rejection::Retry(problems.join("; ")));
        }
        let warnings = problems
            .into_iter()
            .map(|p| format!("scene {}: ignored attribution, {p}", draft.trace.scene_id))
            .collect::<Vec<_>>();
        Ok((fixes, warnings))
    })?;
    for (at, name) in fixes {
        if let Some(d) = trace
            .annotations
            .iter_mut()
            .find(|a| a.at == at)
            .and_then(|a| a.dialogue.as_mut())
        {
            d.speaker = name;
        }
    }
    Ok((trace, warnings))
}

/// Fuses scaffold and scene traces into the final index.
///
/// With refinement disabled this is [`assemble_index`]. Otherwise a
/// synopsis-level call repairs the graph and times the plot points, then every
/// scene with unattributed dialogue gets its own attribution call (in
/// parallel under `mode`).
#[allow(clippy::too_many_arguments)]
pub fn refine_index(
    project_id: &str,
    asset: &MediaAsset,
    scaffold: &GlobalScaffold,
    drafts: &[SceneDraft],
    gateway: &Gateway,
    config: &PipelineConfig,
    mode: ExecMode,
    created_at: &str,
) -> Result<NarrativeIndex> {
    let model = gateway.model_id();
    if !config.refinement_enabled {
        return assemble_index(project_id, asset, scaffold, drafts, &model, config, created_at);
    }
    let ordered = sorted_drafts(drafts);
    let raw: Vec<SceneTrace> = ordered.iter().map(|d| d.trace.clone()).collect();
    check_coverage(&raw, asset.duration)?;

    let (plot_points, graph, mut warnings) = refine_synopsis(scaffold, &ordered, asset.duration, gateway)?;
    let refined = exec::try_map(mode, &ordered, |d| refine_scene(d, &graph, gateway))?;

    let mut all_warnings = scaffold.warnings.clone();
    all_warnings.extend(ordered.iter().flat_map(|d| d.warnings.iter().cloned()));
    all_warnings.append(&mut warnings);
    let mut scenes = Vec::with_capacity(refined.len());
    for (trace, w) in refined {
        all_warnings.extend(w);
        scenes.push(trace);
    }
    let mut synopsis = scaffold.draft_synopsis.clone();
    synopsis.plot_points = plot_points;
    finish(NarrativeIndex {
        schema_version: SCHEMA_VERSION,
        project_id: project_id.to_string(),
        synopsis,
        characters: graph,
        scenes,
        meta: IndexMeta {
            asset_id: asset.asset_id.clone(),
            media_duration: asset.duration,
            config: config.clone(),
            model,
            refinement_enabled: true,
            created_at: created_at.to_string(),
            content_hash: String::new(),
            warnings: all_warnings,
        },
    })
}
