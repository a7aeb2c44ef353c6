//! Edit pipeline: prompt to storyboard, narration, footage retrieval,
//! a validated edit plan, plan transforms and the render graph.
//!
//! Each step is a plain function over artifacts so the orchestrator can run
//! and checkpoint them individually; [`compile_edit`] chains them for
//! one-shot use.

mod adapters;
mod music;
mod render;
mod retrieve;
mod storyboard;
mod subtitles;
mod transform;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use adapters::{
    BeatDetector, BeatGrid, FixtureBeatDetector, FixtureTranscriber, MetronomeBeatDetector, MusicManifest,
    MusicTrack, SilentWavSynthesizer, StaticTranscriber, SynthesizedAudio, Synthesizer, SyntheticSynthesizer, SyntheticTranscriber,
    Transcriber, WordSpan,
};
pub use music::{music_keywords, select_music};
pub use render::{build_render_graph, OutputSpec, MUSIC_GAIN_ALONE, MUSIC_GAIN_UNDER_NARRATION};
pub use retrieve::{assign_rendering_mode, band, band_limits, fit_to_band, retrieve_and_align, Band, Retrieval};
pub use storyboard::{
    estimate_narration, plan_storyboard, write_narration, SectionOrdering, Storyboard, StoryboardSection,
};
pub use subtitles::{allocate, chunk, clauses, generate_subtitles, wrap, LINE_WIDTH, MAX_LINES};
pub use transform::{beat_align, dynamic_crop, micro_cut_refine, nearest_beat, MIN_CLIP};

use crate::canonical::{sha256_hex, to_canonical_bytes};
use crate::config::PipelineConfig;
use crate::error::{Error, Result};
use crate::exec::{self, ExecMode};
use crate::gateway::Gateway;
use crate::media::{execute_render_graph, MediaEngine, RenderGraph, RenderedArtifact, SubtitleCue};
use crate::model::{
    ClipSelection, EditPlan, MediaAsset, MusicRef, NarrationSegment, NarrativeIndex, PlanMeta, SourceMedia,
    SCHEMA_VERSION,
};
use crate::store::{ArtifactKind, ArtifactStore};
use crate::validate::{Validate, ValidationReport};

/// Content hash of a storyboard, used as the plan's back reference.
pub fn storyboard_ref(storyboard: &Storyboard) -> Result<String> {
    Ok(sha256_hex(&to_canonical_bytes(storyboard)?))
}

/// Synthesizes every narration segment, stores the audio as
/// `narration-<id>` and replaces the estimate with the measured duration.
pub fn synthesize_narration(
    store: &ArtifactStore,
    project: &str,
    narration: &[NarrationSegment],
    synthesizer: &dyn Synthesizer,
    voice: &str,
    mode: ExecMode,
) -> Result<Vec<NarrationSegment>> {
    exec::try_map(mode, narration, |n| {
        let audio = synthesizer.synthesize(&n.text, voice)?;
        if audio.duration.as_millis() == 0 {
            return Err(Error::Precondition(format!("synthesized audio for {} is empty", n.narration_id)));
        }
        let kind = ArtifactKind::new(format!("narration-{}", n.narration_id))?;
        let r = store.put_with_ext(project, &kind, &audio.bytes, &audio.ext)?;
        Ok(NarrationSegment {
            audio_uri: Some(r.uri),
            est_duration: audio.duration,
            ..n.clone()
        })
    })
}

/// Retrieves footage for each narration segment in parallel and classifies
/// each clip's rendering mode.
pub fn retrieve_all(
    narration: &[NarrationSegment],
    index: &NarrativeIndex,
    media: &SourceMedia,
    gateway: &Gateway,
    mode: ExecMode,
) -> Result<Vec<Retrieval>> {
    exec::try_map(mode, narration, |n| {
        let mut r = retrieve_and_align(n, index, media, gateway)?;
        for clip in &mut r.clips {
            clip.rendering_mode = assign_rendering_mode(clip, gateway);
        }
        Ok(r)
    })
}

/// Everything [`assemble_edit_plan`] binds together.
#[derive(Debug, Clone)]
pub struct PlanDraft<'a> {
    pub storyboard: &'a Storyboard,
    pub narration: &'a [NarrationSegment],
    /// One selection list per narration segment, in narration order.
    pub selections: &'a [Vec<ClipSelection>],
    pub sources: Vec<SourceMedia>,
    pub index_hash: String,
    pub config: PipelineConfig,
    pub model: String,
    pub warnings: Vec<String>,
}

/// Binds narration and selections into a validated plan. Output positions
/// follow storyboard order, then selection order. The plan id is a content
/// hash, so identical inputs give identical plans.
pub fn assemble_edit_plan(draft: PlanDraft<'_>) -> Result<EditPlan> {
    let mut report = ValidationReport::default();
    if draft.selections.len() != draft.narration.len() {
        report.push(
            "entries",
            format!(
                "{} selection lists for {} narration segments",
                draft.selections.len(),
                draft.narration.len()
            ),
        );
    }
    for (i, (n, clips)) in draft.narration.iter().zip(draft.selections).enumerate() {
        if clips.is_empty() {
            report.push(format!("narration[{i}]"), format!("narration segment {} has no clips", n.narration_id));
        }
    }
    report.into_result()?;
    let entries = draft
        .selections
        .iter()
        .flatten()
        .enumerate()
        .map(|(i, c)| ClipSelection {
            output_position: i as u32,
            ..c.clone()
        })
        .collect();
    let plan = EditPlan {
        schema_version: SCHEMA_VERSION,
        plan_id: String::new(),
        prompt: draft.storyboard.prompt.clone(),
        storyboard_ref: storyboard_ref(draft.storyboard)?,
        sources: draft.sources,
        entries,
        narration: draft.narration.to_vec(),
        music: None,
        meta: PlanMeta {
            index_hash: draft.index_hash,
            config: draft.config,
            model: draft.model,
            warnings: draft.warnings,
        },
    };
    seal_plan(plan)
}

/// Recomputes the content-derived plan id and validates.
pub fn seal_plan(mut plan: EditPlan) -> Result<EditPlan> {
    plan.plan_id.clear();
    plan.plan_id = sha256_hex(&to_canonical_bytes(&plan)?)[..16].to_string();
    plan.validate().into_result()?;
    Ok(plan)
}

/// True when every narration segment's footage lies within the band.
pub fn band_holds(plan: &EditPlan) -> bool {
    plan.narration.iter().all(|n| {
        let total = plan
            .entries
            .iter()
            .filter(|e| e.narration_id.as_deref() == Some(n.narration_id.as_str()))
            .map(|e| e.source.len())
            .sum();
        band(total, n.est_duration) == Band::Within
    })
}

/// Optional collaborators for the transform stage.
#[derive(Clone, Copy, Default)]
pub struct Finishing<'a> {
    pub transcriber: Option<&'a dyn Transcriber>,
    pub beats: Option<&'a dyn BeatDetector>,
    pub music: Option<&'a MusicManifest>,
}

/// Music selection, micro-cut refinement, beat alignment and cropping.
/// A transform that would break the duration band is reverted with a warning.
pub fn finish_plan(
    store: &ArtifactStore,
    plan: &EditPlan,
    storyboard: &Storyboard,
    gateway: Option<&Gateway>,
    finishing: Finishing<'_>,
) -> Result<EditPlan> {
    let mut plan = plan.clone();
    let config = plan.meta.config.clone();

    if let Some(transcriber) = finishing.transcriber {
        let mut words: BTreeMap<String, Vec<WordSpan>> = BTreeMap::new();
        for s in &plan.sources {
            let full = crate::time::TimeRange {
                start: crate::time::Timestamp::ZERO,
                end: s.duration,
            };
            if let Some(w) = transcriber.transcribe(&s.asset_id, full)? {
                words.insert(s.asset_id.clone(), w);
            }
        }
        let (refined, warnings) = micro_cut_refine(&plan, &words, config.microcut_pad);
        plan.meta.warnings.extend(warnings);
        if band_holds(&refined) || !band_holds(&plan) {
            plan.entries = refined.entries;
        } else {
            plan.meta.warnings.push("micro-cut refinement reverted: it would break the duration band".into());
        }
    }

    if let Some(manifest) = finishing.music {
        let keywords = music_keywords(storyboard, gateway);
        match select_music(manifest, &keywords) {
            Some(track) => {
                plan.music = Some(MusicRef {
                    track_id: track.track_id.clone(),
                    uri: track.uri.clone(),
                })
            }
            None => plan.meta.warnings.push("no music track matches the storyboard tones".into()),
        }
    }

    if let (Some(music), Some(detector)) = (&plan.music, finishing.beats) {
        let path = store
            .objects()
            .local_path(&music.uri)
            .ok_or_else(|| Error::Store(format!("music {} has no local path", music.uri)))?;
        let grid = detector.beats(&path)?;
        let aligned = beat_align(&plan, &grid, config.beat_snap_window);
        if band_holds(&aligned) || !band_holds(&plan) {
            plan.entries = aligned.entries;
        } else {
            plan.meta.warnings.push("beat alignment reverted: it would break the duration band".into());
        }
    }

    seal_plan(dynamic_crop(&plan))
}

/// Everything produced by one pass through the edit pipeline.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EditOutcome {
    pub storyboard: Storyboard,
    pub plan: EditPlan,
    pub subtitles: Vec<SubtitleCue>,
    pub graph: RenderGraph,
    pub render: Option<RenderedArtifact>,
}

/// Collaborators for [`compile_edit`].
#[derive(Clone, Copy)]
pub struct EditServices<'a> {
    pub store: &'a ArtifactStore,
    pub gateway: &'a Gateway,
    pub synthesizer: &'a dyn Synthesizer,
    pub engine: Option<&'a dyn MediaEngine>,
    pub finishing: Finishing<'a>,
    pub mode: ExecMode,
}

/// Runs the whole pipeline for one prompt and stores its artifacts.
pub fn compile_edit(
    services: EditServices<'_>,
    project: &str,
    index: &NarrativeIndex,
    asset: &MediaAsset,
    prompt: &str,
) -> Result<EditOutcome> {
    let EditServices {
        store,
        gateway,
        synthesizer,
        engine,
        finishing,
        mode,
    } = services;
    let storyboard = plan_storyboard(index, prompt, gateway)?;
    store.put_json(project, &ArtifactKind::storyboard(), &storyboard)?;
    let narration = write_narration(&storyboard, gateway)?;
    let narration = synthesize_narration(store, project, &narration, synthesizer, "narrator", mode)?;
    store.put_json(project, &ArtifactKind::narration(), &narration)?;
    let source = SourceMedia {
        asset_id: asset.asset_id.clone(),
        uri: asset.uri.clone(),
        duration: asset.duration,
    };
    let retrievals = retrieve_all(&narration, index, &source, gateway, mode)?;
    let selections: Vec<Vec<ClipSelection>> = retrievals.iter().map(|r| r.clips.clone()).collect();
    let plan = assemble_edit_plan(PlanDraft {
        storyboard: &storyboard,
        narration: &narration,
        selections: &selections,
        sources: vec![source],
        index_hash: index.meta.content_hash.clone(),
        config: index.meta.config.clone(),
        model: gateway.model_id().to_string(),
        warnings: retrievals.into_iter().flat_map(|r| r.warnings).collect(),
    })?;
    let plan = finish_plan(store, &plan, &storyboard, Some(gateway), finishing)?;
    store.put_json(project, &ArtifactKind::plan(), &plan)?;
    let subtitles = generate_subtitles(&plan);
    let graph = build_render_graph(&plan, &subtitles, &OutputSpec::default())?;
    store.put_json(project, &ArtifactKind::new("subtitles")?, &subtitles)?;
    store.put_json(project, &ArtifactKind::new("graph")?, &graph)?;
    let render = match engine {
        Some(engine) => Some(execute_render_graph(store, project, &graph, engine)?),
        None => None,
    };
    Ok(EditOutcome {
        storyboard,
        plan,
        subtitles,
        graph,
        render,
    })
}
