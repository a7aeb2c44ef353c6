//! Random fixtures and brute-force oracles shared by the integration tests
//! and the bench.
#![allow(dead_code)]

use std::collections::BTreeMap;

use rand::seq::IndexedRandom;
use rand::Rng;
use reelmind_core::config::PipelineConfig;
use reelmind_core::edit::{BeatGrid, WordSpan};
use reelmind_core::model::{
    Affect, CharacterGraph, CharacterNode, ClipSelection, Dialogue, EditPlan, GlobalSynopsis, IndexMeta, MediaFormat,
    NarrationSegment, NarrativeIndex, PlanMeta, PlotPoint, RenderingMode, SceneTrace, SemanticAnnotation, SourceMedia,
    SCHEMA_VERSION,
};
use reelmind_core::time::{TimeRange, Timestamp};
use reelmind_core::validate::Validate;

pub const VOCAB: [&str; 14] = [
    "harbor", "ledger", "crane", "rain", "dock", "council", "doubt", "fire", "night", "secret", "police", "ship",
    "warehouse", "proof",
];
const SPEAKERS: [&str; 4] = ["Mara", "Crane", "Jun", "unattributed"];

fn words<R: Rng>(rng: &mut R, n: usize) -> String {
    (0..n).map(|_| *VOCAB.choose(rng).unwrap()).collect::<Vec<_>>().join(" ")
}

/// Random index with at most `max_annotations` annotations over small
/// vocabularies, so score ties are common.
pub fn random_index<R: Rng>(rng: &mut R, max_annotations: usize) -> NarrativeIndex {
    let n_scenes = rng.random_range(1..=8usize);
    let scene_len = rng.random_range(30_000..=300_000u64);
    let budget = rng.random_range(0..=max_annotations);
    let mut remaining = budget;
    let mut scenes = Vec::new();
    for s in 0..n_scenes {
        let start = s as u64 * scene_len;
        let range = TimeRange::millis(start, start + scene_len);
        let count = if s + 1 == n_scenes { remaining } else { rng.random_range(0..=remaining / 2) };
        remaining -= count;
        let mut ats: Vec<u64> = (0..count).map(|_| start + rng.random_range(0..=scene_len)).collect();
        ats.sort_unstable();
        ats.dedup();
        let annotations = ats
            .into_iter()
            .map(|at| SemanticAnnotation {
                at: Timestamp::from_millis(at),
                dialogue: rng.random_bool(0.7).then(|| Dialogue {
                    speaker: SPEAKERS.choose(rng).unwrap().to_string(),
                    text: {
                        let n = rng.random_range(1..=4);
                        words(rng, n)
                    },
                }),
                speech_act: rng.random_bool(0.3).then(|| "statement".to_string()),
                visual: {
                    let n = rng.random_range(1..=3);
                    Some(words(rng, n))
                },
                affect: rng.random_bool(0.5).then(|| Affect {
                    emotion: words(rng, 1),
                    intensity: 0.5,
                }),
                boundary: false,
            })
            .collect();
        scenes.push(SceneTrace {
            scene_id: format!("s{:03}", s + 1),
            range,
            annotations,
        });
    }
    let duration = Timestamp::from_millis(n_scenes as u64 * scene_len);
    NarrativeIndex {
        schema_version: SCHEMA_VERSION,
        project_id: "rand".into(),
        synopsis: GlobalSynopsis {
            media_format: MediaFormat::Cinematic,
            setting: "s".into(),
            premise: "p".into(),
            plot_points: vec![],
        },
        characters: CharacterGraph::default(),
        scenes,
        meta: IndexMeta {
            asset_id: "a".into(),
            media_duration: duration,
            config: PipelineConfig::default(),
            model: "m".into(),
            refinement_enabled: false,
            created_at: String::new(),
            content_hash: String::new(),
            warnings: vec![],
        },
    }
}

pub fn random_query<R: Rng>(rng: &mut R) -> String {
    let n = rng.random_range(1..=3);
    let mut q = words(rng, n);
    if rng.random_bool(0.2) {
        q.push_str(" zebra");
    }
    q
}

pub fn random_window<R: Rng>(rng: &mut R, index: &NarrativeIndex) -> Option<TimeRange> {
    let d = index.meta.media_duration.as_millis();
    rng.random_bool(0.4).then(|| {
        let a = rng.random_range(0..d);
        let b = rng.random_range(a + 1..=d);
        TimeRange::millis(a, b)
    })
}

fn oracle_tokens(text: &str) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    let mut cur = String::new();
    for c in text.chars() {
        if c.is_alphanumeric() {
            cur.extend(c.to_lowercase());
        } else if !cur.is_empty() {
            out.push(std::mem::take(&mut cur));
        }
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    out.sort();
    out.dedup();
    out
}

/// Brute-force lexical retrieval: `(source range, justification)` in rank order.
pub fn oracle_retrieve(index: &NarrativeIndex, query: &str, window: Option<TimeRange>) -> Vec<(TimeRange, String)> {
    let q = oracle_tokens(query);
    let mut cands: Vec<(u64, u64, Timestamp, TimeRange)> = Vec::new();
    for scene in &index.scenes {
        for (i, a) in scene.annotations.iter().enumerate() {
            if let Some(w) = window {
                if a.at < w.start || a.at > w.end {
                    continue;
                }
            }
            let t = oracle_tokens(&a.text());
            let shared = q.iter().filter(|x| t.contains(x)).count() as u64;
            if shared == 0 {
                continue;
            }
            let union = (q.len() + t.len()) as u64 - shared;
            let mut start = if i == 0 { scene.range.start } else { scene.annotations[i - 1].at };
            let mut end = scene.annotations.get(i + 1).map_or(scene.range.end, |n| n.at);
            if let Some(w) = window {
                start = start.max(w.start);
                end = end.min(w.end);
            }
            if end <= start {
                continue;
            }
            cands.push((shared, union, a.at, TimeRange { start, end }));
        }
    }
    // Selection sort: best score first (exact fractions), then earliest.
    let mut out = Vec::new();
    while !cands.is_empty() {
        let mut best = 0;
        for j in 1..cands.len() {
            let (s1, u1, t1, _) = cands[best];
            let (s2, u2, t2, _) = cands[j];
            let better = s2 * u1 > s1 * u2 || (s2 * u1 == s1 * u2 && t2 < t1);
            if better {
                best = j;
            }
        }
        let (s, u, at, r) = cands.remove(best);
        out.push((r, format!("annotation at {at} shares {s}/{u} query tokens")));
    }
    out
}

pub fn library_view(clips: &[ClipSelection]) -> Vec<(TimeRange, String)> {
    clips.iter().map(|c| (c.source, c.justification.clone())).collect()
}

/// Random valid plan over one 600 s asset. Narration segments bind runs of
/// consecutive entries; some entries are unnarrated.
pub fn random_plan<R: Rng>(rng: &mut R) -> EditPlan {
    let duration = 600_000u64;
    let n = rng.random_range(1..=10usize);
    let mut entries = Vec::new();
    let mut narration = Vec::new();
    let mut current: Option<String> = None;
    for i in 0..n {
        if rng.random_bool(0.4) || i == 0 {
            current = rng.random_bool(0.75).then(|| format!("n{}", narration.len() + 1));
            if let Some(id) = &current {
                narration.push(NarrationSegment {
                    narration_id: id.clone(),
                    text: "voice over".into(),
                    storyboard_section_id: "sec1".into(),
                    audio_uri: Some(format!("p/plans/narration-{id}.wav")),
                    est_duration: Timestamp::from_millis(rng.random_range(2_000..=30_000)),
                });
            }
        }
        let len = rng.random_range(300..=20_000u64);
        let start = rng.random_range(0..=duration - len);
        let mode = match (current.is_some(), rng.random_range(0..4)) {
            (false, 0) => RenderingMode::Untrimmed,
            (false, _) => RenderingMode::RawAudio,
            (true, 0) => RenderingMode::RawAudio,
            (true, 1) => RenderingMode::Untrimmed,
            (true, _) => RenderingMode::NarratedOverlay,
        };
        entries.push(ClipSelection {
            asset_id: "a".into(),
            source: TimeRange::millis(start, start + len),
            output_position: i as u32,
            justification: "j".into(),
            narrative_function: "f".into(),
            rendering_mode: mode,
            narration_id: current.clone(),
        });
    }
    EditPlan {
        schema_version: SCHEMA_VERSION,
        plan_id: "p".into(),
        prompt: "random".into(),
        storyboard_ref: "s".into(),
        sources: vec![SourceMedia {
            asset_id: "a".into(),
            uri: "p/media/a.json".into(),
            duration: Timestamp::from_millis(duration),
        }],
        entries,
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

pub fn random_grid<R: Rng>(rng: &mut R, span: u64) -> BeatGrid {
    let mut beats: Vec<u64> = (0..rng.random_range(0..=80)).map(|_| rng.random_range(0..=span)).collect();
    beats.sort_unstable();
    beats.dedup();
    BeatGrid {
        beats: beats.into_iter().map(Timestamp::from_millis).collect(),
        track: "t".into(),
    }
}

pub fn random_transcript<R: Rng>(rng: &mut R, duration: u64) -> BTreeMap<String, Vec<WordSpan>> {
    let mut words = Vec::new();
    let mut t = rng.random_range(0..500u64);
    while t < duration {
        let len = rng.random_range(80..=700u64);
        let end = (t + len).min(duration);
        words.push(WordSpan {
            word: "w".into(),
            start: Timestamp::from_millis(t),
            end: Timestamp::from_millis(end),
        });
        t = end + rng.random_range(20..=900u64);
    }
    BTreeMap::from([("a".to_string(), words)])
}

/// Every cut that moved lies outside the narration spans of the plan it
/// ended up in. Spans follow their clips, so a move that shifts a narration
/// span is judged against where that narration now plays.
pub fn moved_cuts_avoid_narration(before: &EditPlan, after: &EditPlan) -> bool {
    let spans: Vec<TimeRange> = after.narration_spans().into_iter().map(|(_, r)| r).collect();
    before
        .cut_points()
        .iter()
        .zip(after.cut_points())
        .filter(|(a, b)| **a != *b)
        .all(|(_, b)| !spans.iter().any(|s| s.strictly_contains(b)))
}

pub fn note(at: u64, visual: &str) -> SemanticAnnotation {
    SemanticAnnotation {
        at: Timestamp::from_secs(at),
        dialogue: None,
        speech_act: None,
        visual: Some(visual.into()),
        affect: None,
        boundary: false,
    }
}

pub fn line(at: u64, speaker: &str, text: &str, emotion: &str) -> SemanticAnnotation {
    SemanticAnnotation {
        at: Timestamp::from_secs(at),
        dialogue: Some(Dialogue {
            speaker: speaker.into(),
            text: text.into(),
        }),
        speech_act: Some("statement".into()),
        visual: None,
        affect: Some(Affect {
            emotion: emotion.into(),
            intensity: 0.7,
        }),
        boundary: false,
    }
}

/// Two five-minute scenes. The same ledger line appears at 110 s and 410 s;
/// Mara doubts the police at 250 s.
pub fn harbor_index() -> NarrativeIndex {
    let scene = |id: &str, start: u64| {
        let annotations = (0..15)
            .map(|i| {
                let at = start + 10 + i * 20;
                match at {
                    110 | 410 => line(at, "Jun Park", "the ledger burns tonight", "fear"),
                    250 => line(at, "Mara Voss", "I doubt we can trust the harbor police", "doubt"),
                    _ => note(at, "rain over the quiet docks"),
                }
            })
            .collect();
        SceneTrace {
            scene_id: id.into(),
            range: TimeRange::secs(start, start + 300),
            annotations,
        }
    };
    let node = |n: &str| CharacterNode {
        name: n.into(),
        aliases: vec![],
        description: String::new(),
    };
    let mut index = NarrativeIndex {
        schema_version: SCHEMA_VERSION,
        project_id: "demo".into(),
        synopsis: GlobalSynopsis {
            media_format: MediaFormat::Cinematic,
            setting: "harbor".into(),
            premise: "a detective and a ledger".into(),
            plot_points: vec![PlotPoint {
                text: "the ledger surfaces".into(),
                range: None,
            }],
        },
        characters: CharacterGraph {
            nodes: vec![node("Mara Voss"), node("Elias Crane"), node("Jun Park")],
            edges: vec![],
        },
        scenes: vec![scene("s001", 0), scene("s002", 300)],
        meta: IndexMeta {
            asset_id: "a".into(),
            media_duration: Timestamp::from_secs(600),
            config: PipelineConfig::default(),
            model: "m".into(),
            refinement_enabled: true,
            created_at: String::new(),
            content_hash: String::new(),
            warnings: vec![],
        },
    };
    index.seal();
    assert!(index.validate().is_empty(), "{}", index.validate());
    index
}
