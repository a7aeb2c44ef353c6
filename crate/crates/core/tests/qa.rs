mod common;

use std::sync::Arc;

use reelmind_core::config::PipelineConfig;
use reelmind_core::gateway::{Gateway, PromptKind, ScriptedProvider, UnavailableProvider};
use reelmind_core::qa::{answer, format_index_prompt, needs_visual_evidence, retrieve_clips};
use reelmind_core::testkit::Story;
use reelmind_core::time::{TimeRange, Timestamp};
use reelmind_core::Error;
use serde_json::json;

fn story_gateway() -> Gateway {
    Gateway::new(Arc::new(Story::noir().provider(Timestamp::from_secs(600))), 2)
}

#[test]
fn large_budget_renders_every_trace() {
    let index = common::harbor_index();
    let text = format_index_prompt(&index, 100_000, None).unwrap();
    for s in &index.scenes {
        for a in &s.annotations {
            assert!(text.contains(&format!("- {} |", a.at)), "missing {}", a.at);
        }
    }
    assert!(!text.contains("elided"));
}

#[test]
fn tight_budget_keeps_every_scene_id() {
    let index = common::harbor_index();
    let full = format_index_prompt(&index, 100_000, None).unwrap();
    let budget = reelmind_core::gateway::estimate_tokens(&full) * 2 / 3;
    let text = format_index_prompt(&index, budget, Some("ledger burns")).unwrap();
    assert!(reelmind_core::gateway::estimate_tokens(&text) <= budget);
    assert!(text.contains("elided"));
    for s in &index.scenes {
        assert!(text.contains(&s.scene_id), "{} vanished", s.scene_id);
    }
}

#[test]
fn tiny_budget_is_a_budget_error() {
    assert!(matches!(format_index_prompt(&common::harbor_index(), 10, None), Err(Error::Budget(_))));
}

#[test]
fn routing_follows_the_question() {
    let index = common::harbor_index();
    let gw = story_gateway();
    let text = needs_visual_evidence("What were the consequences of that decision?", &index, &gw);
    assert!(!text.needs_visual);
    let visual = needs_visual_evidence("Show me the moment the protagonist expresses doubt", &index, &gw);
    assert!(visual.needs_visual);
    assert!(visual.warning.is_none());
}

#[test]
fn routing_degrades_when_the_gateway_is_down() {
    let gw = Gateway::new(Arc::new(UnavailableProvider), 2);
    let d = needs_visual_evidence("Show me the fire", &common::harbor_index(), &gw);
    assert!(!d.needs_visual);
    assert!(d.warning.is_some());
}

#[test]
fn answer_cites_the_known_timestamp() {
    let index = common::harbor_index();
    let r = answer(
        &index,
        "When did the protagonist express doubt about the police?",
        &story_gateway(),
        &PipelineConfig::default(),
    )
    .unwrap();
    assert!(r.grounded);
    assert_eq!(r.cited_timestamps, [Timestamp::from_secs(250)]);
    assert!(r.check(&index).is_empty());
    assert!(r.evidence_clips.is_empty());
}

#[test]
fn visual_answer_attaches_ranked_evidence() {
    let index = common::harbor_index();
    let r = answer(&index, "Show me the moment the ledger burns", &story_gateway(), &PipelineConfig::default())
        .unwrap();
    assert!(r.needs_visual);
    assert!(!r.evidence_clips.is_empty() && r.evidence_clips.len() <= 3);
    assert_eq!(r.evidence_clips[0].source, TimeRange::secs(90, 130));
}

#[test]
fn absent_content_is_admitted() {
    let r = answer(&common::harbor_index(), "Who won the yacht regatta?", &story_gateway(), &PipelineConfig::default()).unwrap();
    assert!(!r.grounded);
    assert!(r.cited_timestamps.is_empty());
}

#[test]
fn empty_question_is_a_precondition_error() {
    assert!(matches!(
        answer(&common::harbor_index(), "  ", &story_gateway(), &PipelineConfig::default()),
        Err(Error::Precondition(_))
    ));
}

#[test]
fn fabricated_citation_is_repaired() {
    let p = Arc::new(ScriptedProvider::new());
    p.push(PromptKind::QaRoute, json!({"needs_visual": false}).to_string());
    p.push(
        PromptKind::QaAnswer,
        json!({"answer": "at the pier", "cited_timestamps": ["00:07:05.000"], "grounded": true}).to_string(),
    );
    p.push(
        PromptKind::QaAnswer,
        json!({"answer": "at the pier", "cited_timestamps": ["00:04:11.500"], "grounded": true}).to_string(),
    );
    let gw = Gateway::new(p.clone(), 2);
    let r = answer(&common::harbor_index(), "Where?", &gw, &PipelineConfig::default()).unwrap();
    assert_eq!(p.calls(PromptKind::QaAnswer), 2);
    assert_eq!(r.cited_timestamps, [Timestamp::from_millis(251_500)]);
}

#[test]
fn exact_annotation_text_ranks_first() {
    let index = common::harbor_index();
    let clips = retrieve_clips(&index, "Mara Voss I doubt we can trust the harbor police statement doubt", None);
    assert_eq!(clips[0].justification, "annotation at 00:04:10.000 shares 11/11 query tokens");
    assert_eq!(clips[0].source, TimeRange::secs(230, 270));
}

#[test]
fn window_without_matches_is_empty() {
    assert!(retrieve_clips(&common::harbor_index(), "ledger", Some(TimeRange::secs(120, 380))).is_empty());
}

#[test]
fn equal_scores_rank_earlier_first() {
    let clips = retrieve_clips(&common::harbor_index(), "ledger", None);
    assert_eq!(clips.len(), 2);
    assert_eq!(clips[0].source, TimeRange::secs(90, 130));
    assert_eq!(clips[1].source, TimeRange::secs(390, 430));
    assert_eq!(
        clips.iter().map(|c| c.output_position).collect::<Vec<_>>(),
        [0, 1]
    );
}

#[test]
fn window_clips_the_neighborhood() {
    let clips = retrieve_clips(&common::harbor_index(), "ledger", Some(TimeRange::secs(100, 120)));
    assert_eq!(clips.len(), 1);
    assert_eq!(clips[0].source, TimeRange::secs(100, 120));
}
