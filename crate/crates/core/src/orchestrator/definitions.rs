//! Built-in workflow definitions and their activity graphs.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::project::load_project;
use super::{Done, Run};
use crate::comprehension::{
    bootstrap_scratchpad, build_global_scaffold, comprehend_scene, comprehend_segment, refine_index, SceneDraft,
    Scratchpad, SegmentSummary,
};
use crate::config::PipelineConfig;
use crate::edit::{
    assemble_edit_plan, build_render_graph, finish_plan, generate_subtitles, plan_storyboard, retrieve_and_align,
    assign_rendering_mode, synthesize_narration, write_narration, Finishing, OutputSpec, PlanDraft, Retrieval,
    Storyboard,
};
use crate::error::{Error, Result};
use crate::exec;
use crate::media::{execute_render_graph, extract_segment, plan_segments, probe, scene_id, RenderedArtifact};
use crate::model::{EditPlan, MediaAsset, NarrationSegment, NarrativeIndex, SegmentArtifact, SourceMedia};
use crate::qa::{answer, QaResponse};
use crate::store::{ArtifactKind, ArtifactRef, ArtifactStore};
use crate::validate::ValidationReport;

pub const DEFINITIONS: [&str; 3] = ["comprehend", "qa", "edit"];

/// Activities known before any fan-out is expanded.
pub(super) fn initial_plan(definition: &str) -> Vec<String> {
    let names: &[&str] = match definition {
        "comprehend" => &["probe", "plan_segments"],
        "qa" => &["answer"],
        "edit" => &["storyboard", "narration", "tts"],
        _ => &[],
    };
    names.iter().map(|s| s.to_string()).collect()
}

/// Config snapshot for a run: the service config with param overrides.
pub(super) fn config_for(base: &PipelineConfig, definition: &str, params: &BTreeMap<String, String>) -> PipelineConfig {
    let mut config = base.clone();
    if definition == "comprehend" {
        if let Some(v) = params.get("refine") {
            config.refinement_enabled = v != "false";
        }
    }
    config
}

/// Validates params and pins the index the run reads as param `index`.
pub(super) fn check_params(
    store: &ArtifactStore,
    project: &str,
    definition: &str,
    mut params: BTreeMap<String, String>,
) -> Result<BTreeMap<String, String>> {
    let required = match definition {
        "qa" => Some("question"),
        "edit" => Some("prompt"),
        _ => None,
    };
    if let Some(key) = required {
        if params.get(key).is_none_or(|v| v.trim().is_empty()) {
            let mut r = ValidationReport::default();
            r.push(format!("params.{key}"), format!("{key} must be non-empty"));
            return Err(Error::Validation(r));
        }
        let index = pinned_index(store, project, &params)?;
        store.get_artifact(&index)?;
        params.insert("index".into(), index.uri);
    }
    Ok(params)
}

fn pinned_index(store: &ArtifactStore, project: &str, params: &BTreeMap<String, String>) -> Result<ArtifactRef> {
    match params.get("index") {
        Some(uri) => {
            let hash = uri
                .rsplit('-')
                .next()
                .and_then(|s| s.split('.').next())
                .unwrap_or_default()
                .to_string();
            Ok(ArtifactRef {
                project: project.to_string(),
                kind: ArtifactKind::index(),
                uri: uri.clone(),
                hash,
            })
        }
        None => store
            .latest(project, &ArtifactKind::index())
            .map_err(|_| Error::Precondition(format!("project {project} has no index yet"))),
    }
}

/// Runs the definition recorded in `run`, returning the result artifact.
pub(super) fn execute(run: &Run<'_>) -> Result<ArtifactRef> {
    let definition = run.record.lock().expect("record lock poisoned").definition.clone();
    match definition.as_str() {
        "comprehend" => comprehend(run),
        "qa" => qa(run),
        "edit" => edit(run),
        other => Err(Error::Definition(other.to_string())),
    }
}

fn fan_out<T, U, F>(run: &Run<'_>, items: &[T], f: F) -> Result<Vec<U>>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> Result<U> + Sync + Send,
{
    let svc = run.services();
    exec::with_workers(svc.mode, svc.workers, || exec::try_map(svc.mode, items, f))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct SegmentStep {
    summary: SegmentSummary,
    scratchpad: Scratchpad,
}

fn comprehend(run: &Run<'_>) -> Result<ArtifactRef> {
    let svc = run.services();
    let store = &svc.store;
    let project = run.project();
    let config = run.config();
    let proj = load_project(store, &project)?;
    let source = proj
        .primary()
        .cloned()
        .ok_or_else(|| Error::Precondition(format!("project {project} has no media")))?;
    let media_hash = run.media_hash();

    let asset: Done<MediaAsset> = run.activity("probe", &[&media_hash], run.scratch_kind("probe"), || {
        probe(store, &source.uri, svc.engine.as_ref())
    })?;
    let plan = run.activity("plan_segments", &[asset.hash()], run.scratch_kind("plan_segments"), || {
        plan_segments(asset.value.duration, &config)
    })?;
    let macros = &plan.value.macro_segments;
    let scenes = &plan.value.scenes;
    let mut planned: Vec<String> = (0..macros.len()).map(|i| format!("extract_macro:{i}")).collect();
    planned.extend((0..scenes.len()).map(|j| format!("extract_scene:{}", scene_id(j))));
    planned.push("bootstrap".into());
    planned.extend((0..macros.len()).map(|i| format!("comprehend_segment:{i}")));
    planned.push("scaffold".into());
    planned.extend((0..scenes.len()).map(|j| format!("scene:{}", scene_id(j))));
    planned.push("refine".into());
    run.plan(&planned)?;

    let extract = |name: String, range| -> Result<Done<SegmentArtifact>> {
        run.activity(&name, &[plan.hash()], run.scratch_kind(&name), || {
            extract_segment(store, &project, &asset.value, range, &config, svc.engine.as_ref())
        })
    };
    let macro_ids: Vec<usize> = (0..macros.len()).collect();
    let macro_segs = fan_out(run, &macro_ids, |i| extract(format!("extract_macro:{i}"), macros[*i]))?;
    let scene_ids: Vec<usize> = (0..scenes.len()).collect();
    let scene_segs = fan_out(run, &scene_ids, |j| extract(format!("extract_scene:{}", scene_id(*j)), scenes[*j]))?;

    let first = &macro_segs[0];
    let mut pad: Done<Scratchpad> = run.activity("bootstrap", &[first.hash()], run.scratch_kind("bootstrap"), || {
        bootstrap_scratchpad(&first.value, &svc.gateway, &config)
    })?;
    let mut pad_hash = pad.output.hash.clone();
    let mut steps: Vec<Done<SegmentStep>> = Vec::new();
    for (i, seg) in macro_segs.iter().enumerate() {
        let name = format!("comprehend_segment:{i}");
        let current = pad.value.clone();
        let step: Done<SegmentStep> = run.activity(&name, &[seg.hash(), &pad_hash], run.scratch_kind(&name), || {
            let (summary, scratchpad) = comprehend_segment(&seg.value, &current, &svc.gateway, &config)?;
            Ok(SegmentStep { summary, scratchpad })
        })?;
        pad = Done {
            value: step.value.scratchpad.clone(),
            output: step.output.clone(),
        };
        pad_hash = step.output.hash.clone();
        steps.push(step);
    }

    let step_hashes: Vec<&str> = steps.iter().map(|s| s.hash()).collect();
    let scaffold = run.activity("scaffold", &step_hashes, run.scratch_kind("scaffold"), || {
        let summaries: Vec<SegmentSummary> = steps.iter().map(|s| s.value.summary.clone()).collect();
        build_global_scaffold(&summaries, &pad.value, &svc.gateway)
    })?;

    let drafts: Vec<Done<SceneDraft>> = fan_out(run, &scene_ids, |j| {
        let sid = scene_id(*j);
        let seg = &scene_segs[*j];
        run.activity(&format!("scene:{sid}"), &[seg.hash(), scaffold.hash()], ArtifactKind::trace(&sid), || {
            comprehend_scene(&seg.value, &sid, &scaffold.value, &svc.gateway, &config)
        })
    })?;

    let mut inputs: Vec<&str> = vec![asset.hash(), scaffold.hash()];
    inputs.extend(drafts.iter().map(|d| d.hash()));
    let index: Done<NarrativeIndex> = run.activity("refine", &inputs, ArtifactKind::index(), || {
        let values: Vec<SceneDraft> = drafts.iter().map(|d| d.value.clone()).collect();
        let created_at = svc.clock.now_rfc3339();
        refine_index(
            &project,
            &asset.value,
            &scaffold.value,
            &values,
            &svc.gateway,
            &config,
            svc.mode,
            &created_at,
        )
    })?;
    Ok(index.output)
}

fn load_index(run: &Run<'_>) -> Result<(ArtifactRef, NarrativeIndex)> {
    let svc = run.services();
    let r = pinned_index(&svc.store, &run.project(), &run.params())?;
    let index = svc.store.get_json(&r)?;
    Ok((r, index))
}

fn qa(run: &Run<'_>) -> Result<ArtifactRef> {
    let svc = run.services();
    let config = run.config();
    let question = run.params().get("question").cloned().unwrap_or_default();
    let (index_ref, index) = load_index(run)?;
    let response: Done<QaResponse> = run.activity("answer", &[&index_ref.hash], ArtifactKind::answer(), || {
        answer(&index, &question, &svc.gateway, &config)
    })?;
    Ok(response.output)
}

/// Final output of an `edit` workflow.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EditResult {
    pub plan: ArtifactRef,
    pub subtitles: ArtifactRef,
    pub graph: ArtifactRef,
    pub render: RenderedArtifact,
    /// Object-store key of the rendered output (or manifest).
    pub download_uri: String,
}

fn edit(run: &Run<'_>) -> Result<ArtifactRef> {
    let svc = run.services();
    let store = &svc.store;
    let project = run.project();
    let prompt = run.params().get("prompt").cloned().unwrap_or_default();
    let (index_ref, index) = load_index(run)?;
    let asset = load_project(store, &project)?
        .primary()
        .cloned()
        .ok_or_else(|| Error::Precondition(format!("project {project} has no media")))?;
    let source = SourceMedia {
        asset_id: asset.asset_id.clone(),
        uri: asset.uri.clone(),
        duration: asset.duration,
    };

    let storyboard: Done<Storyboard> = run.activity("storyboard", &[&index_ref.hash], ArtifactKind::storyboard(), || {
        plan_storyboard(&index, &prompt, &svc.gateway)
    })?;
    let narration: Done<Vec<NarrationSegment>> =
        run.activity("narration", &[storyboard.hash()], run.scratch_kind("narration"), || {
            write_narration(&storyboard.value, &svc.gateway)
        })?;
    let voiced: Done<Vec<NarrationSegment>> = run.activity("tts", &[narration.hash()], ArtifactKind::narration(), || {
        synthesize_narration(store, &project, &narration.value, svc.synthesizer.as_ref(), "narrator", svc.mode)
    })?;

    let mut planned: Vec<String> = voiced.value.iter().map(|n| format!("retrieve:{}", n.narration_id)).collect();
    planned.extend(["assemble", "finish", "render"].map(String::from));
    run.plan(&planned)?;

    let retrievals: Vec<Done<Retrieval>> = fan_out(run, &voiced.value, |n| {
        let name = format!("retrieve:{}", n.narration_id);
        run.activity(&name, &[voiced.hash(), &index_ref.hash], run.scratch_kind(&name), || {
            let mut r = retrieve_and_align(n, &index, &source, &svc.gateway)?;
            for clip in &mut r.clips {
                clip.rendering_mode = assign_rendering_mode(clip, &svc.gateway);
            }
            Ok(r)
        })
    })?;

    let mut inputs: Vec<&str> = vec![storyboard.hash(), voiced.hash(), &index_ref.hash];
    inputs.extend(retrievals.iter().map(|r| r.hash()));
    let assembled: Done<EditPlan> = run.activity("assemble", &inputs, run.scratch_kind("assemble"), || {
        let selections: Vec<_> = retrievals.iter().map(|r| r.value.clips.clone()).collect();
        assemble_edit_plan(PlanDraft {
            storyboard: &storyboard.value,
            narration: &voiced.value,
            selections: &selections,
            sources: vec![source.clone()],
            index_hash: index.meta.content_hash.clone(),
            config: index.meta.config.clone(),
            model: svc.gateway.model_id().to_string(),
            warnings: retrievals.iter().flat_map(|r| r.value.warnings.clone()).collect(),
        })
    })?;
    let finished: Done<EditPlan> = run.activity("finish", &[assembled.hash()], ArtifactKind::plan(), || {
        let finishing = Finishing {
            transcriber: svc.transcriber.as_deref(),
            beats: svc.beats.as_deref(),
            music: svc.music.as_ref(),
        };
        finish_plan(store, &assembled.value, &storyboard.value, Some(&svc.gateway), finishing)
    })?;
    let result: Done<EditResult> = run.activity("render", &[finished.hash()], run.scratch_kind("render"), || {
        let cues = generate_subtitles(&finished.value);
        let graph = build_render_graph(&finished.value, &cues, &OutputSpec::default())?;
        let subtitles = store.put_json(&project, &ArtifactKind::new("subtitles")?, &cues)?;
        let graph_ref = store.put_json(&project, &ArtifactKind::new("graph")?, &graph)?;
        let render = execute_render_graph(store, &project, &graph, svc.engine.as_ref())?;
        Ok(EditResult {
            plan: finished.output.clone(),
            subtitles,
            graph: graph_ref,
            download_uri: render.artifact.uri.clone(),
            render,
        })
    })?;
    Ok(result.output)
}
