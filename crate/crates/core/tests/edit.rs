mod common;

use std::collections::BTreeMap;
use std::sync::Arc;

use reelmind_core::canonical::{from_json_bytes, to_canonical_bytes};
use reelmind_core::config::PipelineConfig;
use reelmind_core::edit::{
    assemble_edit_plan, assign_rendering_mode, beat_align, build_render_graph, estimate_narration,
    generate_subtitles, micro_cut_refine, plan_storyboard, retrieve_and_align, write_narration, BeatGrid,
    OutputSpec, PlanDraft, SectionOrdering, Storyboard, StoryboardSection, WordSpan,
};
use reelmind_core::gateway::{Gateway, PromptKind, ScriptedProvider};
use reelmind_core::model::{
    ClipSelection, EditPlan, NarrationSegment, PlanMeta, RenderingMode, SourceMedia, SCHEMA_VERSION,
};
use reelmind_core::testkit::Story;
use reelmind_core::time::{TimeRange, Timestamp};
use reelmind_core::validate::Validate;
use reelmind_core::Error;
use serde_json::json;

fn ms(v: u64) -> Timestamp {
    Timestamp::from_millis(v)
}

fn story_gateway() -> Gateway {
    Gateway::new(Arc::new(Story::noir().provider(Timestamp::from_secs(600))), 2)
}

fn scripted() -> (Arc<ScriptedProvider>, Gateway) {
    let p = Arc::new(ScriptedProvider::new());
    let gw = Gateway::new(p.clone(), 2);
    (p, gw)
}

fn source() -> SourceMedia {
    SourceMedia {
        asset_id: "a".into(),
        uri: "demo/media/a.json".into(),
        duration: Timestamp::from_secs(600),
    }
}

fn storyboard(sections: usize) -> Storyboard {
    Storyboard {
        prompt: "retell the case".into(),
        reasoning: "start at the harbor".into(),
        sections: (1..=sections)
            .map(|i| StoryboardSection {
                section_id: format!("sec{i}"),
                intent: format!("part {i}"),
                tone: "somber".into(),
                target_duration: Timestamp::from_secs(12),
                ordering: SectionOrdering::Chronological,
            })
            .collect(),
    }
}

fn segment(id: &str, secs: u64) -> NarrationSegment {
    NarrationSegment {
        narration_id: id.into(),
        text: "the harbor kept its secrets".into(),
        storyboard_section_id: "sec1".into(),
        audio_uri: Some(format!("demo/narration-{id}.wav")),
        est_duration: Timestamp::from_secs(secs),
    }
}

fn clip(start: u64, end: u64, mode: RenderingMode, narration: Option<&str>) -> ClipSelection {
    ClipSelection {
        asset_id: "a".into(),
        source: TimeRange::millis(start, end),
        output_position: 0,
        justification: "shows the pier".into(),
        narrative_function: "exposition".into(),
        rendering_mode: mode,
        narration_id: narration.map(str::to_string),
    }
}

fn plan(entries: Vec<ClipSelection>, narration: Vec<NarrationSegment>) -> EditPlan {
    EditPlan {
        schema_version: SCHEMA_VERSION,
        plan_id: "p".into(),
        prompt: "x".into(),
        storyboard_ref: "s".into(),
        sources: vec![source()],
        entries: entries
            .into_iter()
            .enumerate()
            .map(|(i, c)| ClipSelection {
                output_position: i as u32,
                ..c
            })
            .collect(),
        narration,
        music: None,
        meta: PlanMeta {
            index_hash: "h".into(),
            config: PipelineConfig::default(),
            model: "m".into(),
            warnings: vec![],
        },
    }
}

fn clips_json(ranges: &[(&str, &str)]) -> String {
    let clips: Vec<_> = ranges
        .iter()
        .map(|(s, e)| json!({"start": s, "end": e, "justification": "the pier", "narrative_function": "exposition"}))
        .collect();
    json!({ "clips": clips }).to_string()
}

#[test]
fn antagonist_prompt_centres_the_antagonist() {
    let index = common::harbor_index();
    let sb = plan_storyboard(&index, "Retell the story from the antagonist's perspective", &story_gateway()).unwrap();
    assert!(sb.reasoning.contains("Elias Crane"));
    assert!(!sb.sections.is_empty());
    assert!(sb.sections.iter().all(|s| s.intent.contains("Elias Crane")));
    assert!(sb.validate().is_empty());
}

#[test]
fn empty_prompt_is_rejected() {
    let err = plan_storyboard(&common::harbor_index(), " ", &story_gateway());
    assert!(matches!(err, Err(Error::Precondition(_))));
}

#[test]
fn storyboard_without_sections_exhausts_repairs() {
    let (p, gw) = scripted();
    p.push(PromptKind::StoryboardReason, "thinking");
    for _ in 0..3 {
        p.push(PromptKind::StoryboardStructure, r#"{"sections": []}"#);
    }
    let err = plan_storyboard(&common::harbor_index(), "a recap", &gw);
    assert!(matches!(err, Err(Error::StructuredOutput { ref attempts, .. }) if attempts.len() == 3));
}

#[test]
fn one_narration_segment_per_section() {
    let segs = write_narration(&storyboard(3), &story_gateway()).unwrap();
    assert_eq!(segs.len(), 3);
    for (i, s) in segs.iter().enumerate() {
        assert_eq!(s.narration_id, format!("n{}", i + 1));
        assert_eq!(s.storyboard_section_id, format!("sec{}", i + 1));
        assert_eq!(s.est_duration, estimate_narration(&s.text));
    }
}

#[test]
fn fifty_words_take_twenty_seconds() {
    assert_eq!(estimate_narration(&"word ".repeat(50)), Timestamp::from_secs(20));
}

#[test]
fn empty_storyboard_has_no_narration() {
    assert!(matches!(write_narration(&storyboard(0), &story_gateway()), Err(Error::Precondition(_))));
}

#[test]
fn in_band_selection_is_accepted_as_is() {
    let (p, gw) = scripted();
    p.push(PromptKind::RetrieveClips, clips_json(&[("00:01:00.000", "00:01:25.000")]));
    let r = retrieve_and_align(&segment("n1", 20), &common::harbor_index(), &source(), &gw).unwrap();
    assert_eq!(p.calls(PromptKind::RetrieveClips), 1);
    assert_eq!(r.clips.len(), 1);
    assert_eq!(r.clips[0].source, TimeRange::secs(60, 85));
    assert_eq!(r.clips[0].narration_id.as_deref(), Some("n1"));
    assert!(r.warnings.is_empty());
}

#[test]
fn over_band_selection_is_reprompted_then_trimmed() {
    let (p, gw) = scripted();
    for _ in 0..2 {
        p.push(PromptKind::RetrieveClips, clips_json(&[("00:01:00.000", "00:01:45.000")]));
    }
    let r = retrieve_and_align(&segment("n1", 20), &common::harbor_index(), &source(), &gw).unwrap();
    assert_eq!(p.calls(PromptKind::RetrieveClips), 2);
    assert_eq!(r.clips[0].source, TimeRange::secs(60, 90));
    assert_eq!(r.warnings.len(), 1);
}

#[test]
fn clips_outside_the_media_fail() {
    let (p, gw) = scripted();
    for _ in 0..3 {
        p.push(PromptKind::RetrieveClips, clips_json(&[("00:09:50.000", "00:10:20.000")]));
    }
    let err = retrieve_and_align(&segment("n1", 20), &common::harbor_index(), &source(), &gw);
    assert!(matches!(err, Err(Error::StructuredOutput { .. })));
}

#[test]
fn rendering_mode_follows_the_classifier() {
    let (p, gw) = scripted();
    let c = clip(0, 10_000, RenderingMode::NarratedOverlay, Some("n1"));
    for (answer, want) in [
        ("narrated_overlay", RenderingMode::NarratedOverlay),
        ("raw_audio", RenderingMode::RawAudio),
        ("abstain", RenderingMode::NarratedOverlay),
    ] {
        p.push(PromptKind::ClassifyRenderingMode, json!({ "mode": answer }).to_string());
        assert_eq!(assign_rendering_mode(&c, &gw), want, "{answer}");
    }
    assert_eq!(
        assign_rendering_mode(&clip(0, 10_000, RenderingMode::NarratedOverlay, None), &story_gateway()),
        RenderingMode::NarratedOverlay
    );
}

fn draft_inputs() -> (Storyboard, Vec<NarrationSegment>, Vec<Vec<ClipSelection>>) {
    let sb = storyboard(2);
    let narration = vec![segment("n1", 10), segment("n2", 10)];
    let selections = vec![
        vec![
            clip(10_000, 15_000, RenderingMode::NarratedOverlay, Some("n1")),
            clip(40_000, 46_000, RenderingMode::NarratedOverlay, Some("n1")),
        ],
        vec![clip(100_000, 111_000, RenderingMode::RawAudio, Some("n2"))],
    ];
    (sb, narration, selections)
}

fn draft<'a>(
    sb: &'a Storyboard,
    narration: &'a [NarrationSegment],
    selections: &'a [Vec<ClipSelection>],
) -> PlanDraft<'a> {
    PlanDraft {
        storyboard: sb,
        narration,
        selections,
        sources: vec![source()],
        index_hash: "h".into(),
        config: PipelineConfig::default(),
        model: "m".into(),
        warnings: vec![],
    }
}

#[test]
fn assembled_plan_validates_and_round_trips() {
    let (sb, narration, selections) = draft_inputs();
    let plan = assemble_edit_plan(draft(&sb, &narration, &selections)).unwrap();
    assert!(plan.validate().is_empty());
    assert_eq!(
        plan.entries.iter().map(|e| e.output_position).collect::<Vec<_>>(),
        [0, 1, 2]
    );
    let bytes = to_canonical_bytes(&plan).unwrap();
    let back: EditPlan = from_json_bytes(&bytes).unwrap();
    assert_eq!(back, plan);
    assert_eq!(to_canonical_bytes(&back).unwrap(), bytes);
    let again = assemble_edit_plan(draft(&sb, &narration, &selections)).unwrap();
    assert_eq!(again.plan_id, plan.plan_id);
}

#[test]
fn narration_without_clips_is_invalid() {
    let (sb, narration, mut selections) = draft_inputs();
    selections[1].clear();
    match assemble_edit_plan(draft(&sb, &narration, &selections)) {
        Err(Error::Validation(report)) => assert_eq!(report.violations[0].path, "narration[1]"),
        other => panic!("expected a validation error, got {other:?}"),
    }
}

fn grid(beats: &[u64]) -> BeatGrid {
    BeatGrid {
        beats: beats.iter().map(|b| ms(*b)).collect(),
        track: "t".into(),
    }
}

#[test]
fn cut_near_a_beat_snaps() {
    let p = plan(
        vec![clip(0, 10_300, RenderingMode::RawAudio, None), clip(50_000, 60_000, RenderingMode::RawAudio, None)],
        vec![],
    );
    let out = beat_align(&p, &grid(&[10_500]), ms(500));
    assert_eq!(out.cut_points(), [ms(10_500)]);
    assert_eq!(out.entries[1].source, TimeRange::millis(50_200, 60_000));
    assert_eq!(out.total_duration(), p.total_duration());
}

#[test]
fn cut_on_a_beat_stays() {
    let p = plan(
        vec![clip(0, 11_000, RenderingMode::RawAudio, None), clip(50_000, 60_000, RenderingMode::RawAudio, None)],
        vec![],
    );
    assert_eq!(beat_align(&p, &grid(&[11_000]), ms(500)), p);
}

#[test]
fn beat_inside_narration_is_not_used() {
    // Narration is audible over [10.4, 14.0]; the nearest beat falls inside it.
    let p = plan(
        vec![
            clip(0, 10_400, RenderingMode::RawAudio, None),
            clip(50_000, 53_600, RenderingMode::NarratedOverlay, Some("n1")),
        ],
        vec![NarrationSegment {
            est_duration: ms(3_600),
            ..segment("n1", 0)
        }],
    );
    assert_eq!(p.narration_spans()[0].1, TimeRange::millis(10_400, 14_000));
    assert_eq!(beat_align(&p, &grid(&[10_500]), ms(500)), p);
}

fn words(spans: &[(u64, u64)]) -> BTreeMap<String, Vec<WordSpan>> {
    let w = spans
        .iter()
        .map(|(s, e)| WordSpan {
            word: "harbor".into(),
            start: ms(*s),
            end: ms(*e),
        })
        .collect();
    BTreeMap::from([("a".to_string(), w)])
}

#[test]
fn cut_inside_a_word_moves_past_it() {
    let p = plan(vec![clip(0, 10_200, RenderingMode::RawAudio, None)], vec![]);
    let (out, warnings) = micro_cut_refine(&p, &words(&[(9_900, 10_420)]), ms(150));
    assert_eq!(out.entries[0].source.end, ms(10_570));
    assert!(warnings.is_empty());
}

#[test]
fn cut_between_words_is_kept() {
    let p = plan(vec![clip(0, 10_600, RenderingMode::RawAudio, None)], vec![]);
    let (out, _) = micro_cut_refine(&p, &words(&[(9_900, 10_420), (10_800, 11_200)]), ms(150));
    assert_eq!(out, p);
}

#[test]
fn missing_transcript_is_reported() {
    let p = plan(vec![clip(0, 10_200, RenderingMode::RawAudio, None)], vec![]);
    let (out, warnings) = micro_cut_refine(&p, &BTreeMap::new(), ms(150));
    assert_eq!(out, p);
    assert_eq!(warnings.len(), 1);
}

#[test]
fn subtitles_split_narration_by_clause() {
    let p = plan(
        vec![clip(0, 10_000, RenderingMode::NarratedOverlay, Some("n1"))],
        vec![NarrationSegment {
            text: "cold rain, dark pier.".into(),
            ..segment("n1", 10)
        }],
    );
    let cues = generate_subtitles(&p);
    assert_eq!(
        cues.iter().map(|c| c.range).collect::<Vec<_>>(),
        [TimeRange::secs(0, 5), TimeRange::secs(5, 10)]
    );
    assert_eq!(cues[0].text, "cold rain,");
}

#[test]
fn plans_without_narration_get_no_subtitles() {
    let p = plan(vec![clip(0, 10_000, RenderingMode::RawAudio, None)], vec![]);
    assert!(generate_subtitles(&p).is_empty());
}

fn graph_plan() -> EditPlan {
    plan(
        vec![
            clip(0, 10_000, RenderingMode::NarratedOverlay, Some("n1")),
            clip(20_000, 25_000, RenderingMode::RawAudio, None),
            clip(40_000, 45_000, RenderingMode::Untrimmed, None),
        ],
        vec![segment("n1", 8)],
    )
}

#[test]
fn render_graph_has_one_extract_per_entry() {
    let p = graph_plan();
    let g = build_render_graph(&p, &generate_subtitles(&p), &OutputSpec::default()).unwrap();
    assert_eq!(g.count("ExtractClip"), 3);
    assert_eq!(g.count("OverlayAudio"), 1);
    assert_eq!(g.count("Concat"), 1);
    assert_eq!(g.count("BurnSubtitle"), 1);
    assert_eq!(g.count("MixMusic"), 0);
    assert_eq!(g.count("Output"), 1);
    assert_eq!(g.topological_order().unwrap().len(), g.nodes.len());
}

#[test]
fn overlay_without_audio_is_a_graph_error() {
    let mut p = graph_plan();
    p.narration[0].audio_uri = None;
    assert!(matches!(build_render_graph(&p, &[], &OutputSpec::default()), Err(Error::Graph(_))));
}
