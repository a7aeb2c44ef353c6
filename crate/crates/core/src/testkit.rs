//! Deterministic fixtures: synthetic media and a scripted "story" model.
//!
//! [`Story`] describes a small fictional work (characters, key moments) and
//! [`Story::responder`] answers every prompt kind from the request's context
//! blocks alone, so a run against it is a pure function of its inputs. The
//! CLI uses it for offline runs; tests and benches use it as the mock model.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde_json::{json, Value};

use crate::clock::FixedClock;
use crate::comprehension::{field_line, parse_range_line};
use crate::config::PipelineConfig;
use crate::error::Result;
use crate::exec::ExecMode;
use crate::gateway::Gateway;
use crate::media::NullEngine;
use crate::orchestrator::{create_project, Orchestrator, RetryPolicy, Services, WorkflowRecord};
use crate::edit::{MetronomeBeatDetector, MusicManifest, MusicTrack, SyntheticTranscriber};
use crate::store::{ArtifactKind, ArtifactStore};
use crate::gateway::{PromptKind, ProviderRequest, Responder, ScriptedProvider};
use crate::media::synthetic::SyntheticMedia;
use crate::model::{fold_name, MediaFormat};
use crate::time::{TimeRange, Timestamp};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StoryCharacter {
    pub name: String,
    pub aliases: Vec<String>,
    pub description: String,
    /// Fraction of the runtime (per mille) at which the character first appears.
    pub introduced_permille: u64,
    /// Omitted from the coarse pass; only heard in scenes as its first alias.
    pub hidden: bool,
}

/// A scripted line placed at the annotation nearest a fraction of the runtime.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KeyMoment {
    pub permille: u64,
    pub speaker: String,
    pub line: String,
    pub speech_act: String,
    pub visual: String,
    pub emotion: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Story {
    pub format: MediaFormat,
    pub setting: String,
    pub premise: String,
    pub characters: Vec<StoryCharacter>,
    pub edges: Vec<(String, String, String)>,
    pub moments: Vec<KeyMoment>,
    /// Multiplies the length of descriptions, dynamics and threads the coarse
    /// pass reports. 1 is terse; large values force scratchpad compression.
    pub verbosity: usize,
}

const LINES: [&str; 8] = [
    "We should check the harbor records before dawn",
    "Nobody leaves the city until this is settled",
    "I found the ledger hidden behind the stove",
    "The council meets tomorrow and they will ask questions",
    "Keep your voice down, the walls are thin here",
    "If the shipment is late we lose everything",
    "Tell me again what you saw at the pier",
    "This map does not match the old survey",
];
const VISUALS: [&str; 8] = [
    "low-key lighting in a cramped office, medium close-up",
    "wide shot of the rain-soaked harbor at night",
    "handheld tracking shot through a crowded market",
    "static two-shot across a kitchen table, warm practical light",
    "overhead shot of papers spread on a desk",
    "silhouettes against a window, cold blue backlight",
    "slow push-in on a face lit by a single lamp",
    "exterior establishing shot of the council hall at dawn",
];
const EMOTIONS: [&str; 6] = ["tense", "calm", "anxious", "determined", "wary", "hopeful"];
const SPEECH_ACTS: [&str; 5] = ["statement", "question", "warning", "request", "accusation"];
const STOPWORDS: [&str; 24] = [
    "the", "a", "an", "of", "to", "in", "on", "at", "is", "was", "did", "does", "do", "when", "what",
    "who", "where", "why", "how", "me", "show", "find", "that", "and",
];

fn mix(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn hash_str(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ u64::from(b)).wrapping_mul(0x100_0000_01b3))
}

/// Lowercased alphanumeric tokens.
pub fn tokens(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

fn content_tokens(text: &str) -> Vec<String> {
    let mut t: Vec<String> = tokens(text)
        .into_iter()
        .filter(|t| !STOPWORDS.contains(&t.as_str()))
        .collect();
    t.sort();
    t.dedup();
    t
}

fn block<'a>(req: &'a ProviderRequest<'_>, label: &str) -> &'a str {
    req.block(label).unwrap_or("")
}

/// `- Name: description` entries under `characters:` in a rendered scratchpad.
fn scratchpad_names(text: &str) -> Vec<String> {
    let mut in_chars = false;
    let mut out = Vec::new();
    for line in text.lines() {
        if line == "characters:" {
            in_chars = true;
            continue;
        }
        if in_chars {
            match line.strip_prefix("- ") {
                Some(entry) => out.push(entry.split(':').next().unwrap_or(entry).trim().to_string()),
                None => break,
            }
        }
    }
    out
}

impl Default for Story {
    fn default() -> Self {
        Self::noir()
    }
}

impl Story {
    /// Harbor-city mystery with a protagonist, an antagonist, an ally who
    /// arrives later, and a hidden character the coarse pass never names.
    pub fn noir() -> Self {
        let ch = |name: &str, aliases: &[&str], description: &str, at: u64, hidden: bool| StoryCharacter {
            name: name.into(),
            aliases: aliases.iter().map(|a| a.to_string()).collect(),
            description: description.into(),
            introduced_permille: at,
            hidden,
        };
        let moment = |at: u64, speaker: &str, line: &str, act: &str, visual: &str, emotion: &str| KeyMoment {
            permille: at,
            speaker: speaker.into(),
            line: line.into(),
            speech_act: act.into(),
            visual: visual.into(),
            emotion: emotion.into(),
        };
        Self {
            format: MediaFormat::Cinematic,
            setting: "a rain-soaked harbor city in the 1950s".into(),
            premise: "a detective uncovers a smuggling ring run by a respected councilman".into(),
            characters: vec![
                ch("Mara Voss", &["Mara", "the detective"], "protagonist, a stubborn harbor detective", 0, false),
                ch("Elias Crane", &["Crane", "the councilman"], "antagonist, a councilman running the smuggling ring", 0, false),
                ch("Jun Park", &["Jun"], "a dock clerk who becomes Mara's ally", 120, false),
                ch("Odile Fenn", &["Stranger", "the stranger"], "a witness who follows Mara from the shadows", 500, true),
            ],
            edges: vec![
                ("Mara Voss".into(), "Elias Crane".into(), "investigates".into()),
                ("Jun Park".into(), "Mara Voss".into(), "helps".into()),
                ("Elias Crane".into(), "Jun Park".into(), "threatens".into()),
                ("Odile Fenn".into(), "Mara Voss".into(), "watches".into()),
            ],
            moments: vec![
                moment(150, "Jun Park", "The manifests list crates that never arrived", "revelation", "close-up of a torn shipping manifest", "surprised"),
                moment(300, "Mara Voss", "I doubt we can trust the harbor police anymore", "confession", "Mara alone at her desk, rain on the window", "doubt"),
                moment(550, "Elias Crane", "Burn the warehouse before the inspectors arrive", "order", "Crane lit by a match in a dark warehouse", "cold"),
                moment(700, "Mara Voss", "I decided to confront Crane at the council hall", "decision", "Mara climbing the council hall steps at dawn", "resolute"),
                moment(850, "Elias Crane", "You have no proof and no friends left", "threat", "Crane towering over Mara in the council chamber", "contempt"),
            ],
            verbosity: 1,
        }
    }

    pub fn with_verbosity(mut self, verbosity: usize) -> Self {
        self.verbosity = verbosity.max(1);
        self
    }

    pub fn protagonist(&self) -> &str {
        &self.characters[0].name
    }

    pub fn antagonist(&self) -> &str {
        &self.characters[1].name
    }

    fn introduced_at(&self, c: &StoryCharacter, duration: Timestamp) -> Timestamp {
        duration.scale(c.introduced_permille, 1000)
    }

    /// Canonical name for a heard name or alias.
    pub fn resolve(&self, heard: &str) -> Option<&str> {
        let key = fold_name(heard);
        self.characters
            .iter()
            .find(|c| fold_name(&c.name) == key || c.aliases.iter().any(|a| fold_name(a) == key))
            .map(|c| c.name.as_str())
    }

    fn description(&self, c: &StoryCharacter) -> String {
        let mut d = c.description.clone();
        for i in 1..self.verbosity {
            d.push_str(&format!(", noted again in detail pass {i} with every mannerism and habit recorded"));
        }
        d
    }

    /// Synthetic source container for a given runtime.
    pub fn media(duration: Timestamp) -> SyntheticMedia {
        SyntheticMedia::video(duration, 1920, 1080, 24.0)
    }

    /// The answer for any prompt kind, or `None` when the request is unusable.
    pub fn respond(&self, req: &ProviderRequest<'_>, duration: Timestamp) -> Option<String> {
        let value = match req.kind {
            PromptKind::BootstrapScratchpad => self.bootstrap(req, duration),
            PromptKind::SegmentComprehend => self.segment(req, duration),
            PromptKind::CompressScratchpad => self.compress(req),
            PromptKind::DraftScaffold => self.scaffold(req),
            PromptKind::SceneComprehend => self.scene(req, duration),
            PromptKind::Refine => self.refine(req),
            PromptKind::QaRoute => self.route(req),
            PromptKind::QaAnswer => self.answer(req),
            PromptKind::StoryboardReason => return Some(self.reason(req)),
            PromptKind::StoryboardStructure => self.storyboard(req),
            PromptKind::Narrate => self.narrate(req),
            PromptKind::RetrieveClips => self.retrieve(req),
            PromptKind::ClassifyRenderingMode => self.classify(req),
            PromptKind::MusicSelect => self.music(req),
        }?;
        Some(value.to_string())
    }

    /// A responder closed over this story and a media runtime.
    pub fn responder(self, duration: Timestamp) -> Responder {
        let story = Arc::new(self);
        Arc::new(move |req| story.respond(req, duration))
    }

    pub fn provider(self, duration: Timestamp) -> ScriptedProvider {
        ScriptedProvider::with_responder(self.responder(duration)).named("story-mock")
    }

    fn visible_in(&self, range: TimeRange, duration: Timestamp) -> Vec<&StoryCharacter> {
        self.characters
            .iter()
            .filter(|c| !c.hidden && self.introduced_at(c, duration) < range.end)
            .collect()
    }

    fn character_json(&self, c: &StoryCharacter) -> Value {
        json!({"name": c.name, "description": self.description(c)})
    }

    fn threads(&self, range: TimeRange) -> Vec<String> {
        let base = range.start.as_millis() / 1000;
        (0..self.verbosity)
            .map(|i| format!("who moved the crates logged near second {} (lead {i})", base + i as u64))
            .collect()
    }

    fn bootstrap(&self, req: &ProviderRequest<'_>, duration: Timestamp) -> Option<Value> {
        let range = parse_range_line(block(req, "segment"))?;
        let chars: Vec<Value> = self
            .visible_in(range, duration)
            .into_iter()
            .map(|c| self.character_json(c))
            .collect();
        Some(json!({
            "media_format": crate::comprehension::format_label(self.format),
            "setting": self.setting,
            "premise": self.premise,
            "characters": chars,
            "dynamics": [format!("{} distrusts {}", self.protagonist(), self.antagonist())],
            "open_threads": self.threads(range),
        }))
    }

    fn segment(&self, req: &ProviderRequest<'_>, duration: Timestamp) -> Option<Value> {
        let range = parse_range_line(block(req, "segment"))?;
        let known = scratchpad_names(block(req, "scratchpad"));
        let new: Vec<Value> = self
            .visible_in(range, duration)
            .into_iter()
            .filter(|c| !known.iter().any(|k| fold_name(k) == fold_name(&c.name)))
            .map(|c| self.character_json(c))
            .collect();
        let recap = if known.is_empty() {
            "New faces drive the story".to_string()
        } else {
            format!("Continuing from earlier, {} press on", known.join(" and "))
        };
        let dynamics: Vec<String> = (0..self.verbosity)
            .map(|i| {
                format!(
                    "tension between {} and {} sharpens after second {} (note {i})",
                    self.protagonist(),
                    self.antagonist(),
                    range.start.as_millis() / 1000
                )
            })
            .collect();
        Some(json!({
            "summary": format!("{recap} between {} and {}.", range.start, range.end),
            "new_characters": new,
            "dynamics": dynamics,
            "open_threads": self.threads(range),
            "resolved_threads": [],
        }))
    }

    fn compress(&self, req: &ProviderRequest<'_>) -> Option<Value> {
        let pad = block(req, "scratchpad");
        let names = scratchpad_names(pad);
        let chars: Vec<Value> = names
            .iter()
            .map(|n| {
                let short = self
                    .characters
                    .iter()
                    .find(|c| c.name == *n)
                    .map_or("character", |c| c.description.as_str());
                json!({"name": n, "description": short})
            })
            .collect();
        Some(json!({
            "media_format": field_line(pad, "media_format").unwrap_or("other"),
            "setting": self.setting,
            "premise": self.premise,
            "characters": chars,
            "dynamics": [format!("{} distrusts {}", self.protagonist(), self.antagonist())],
            "open_threads": ["who runs the smuggling ring"],
        }))
    }

    fn scaffold(&self, req: &ProviderRequest<'_>) -> Option<Value> {
        let pad = block(req, "scratchpad");
        let names = scratchpad_names(pad);
        let nodes: Vec<Value> = names
            .iter()
            .map(|n| {
                let c = self.characters.iter().find(|c| c.name == *n);
                json!({
                    "name": n,
                    "aliases": c.map(|c| c.aliases.clone()).unwrap_or_default(),
                    "description": c.map_or(String::new(), |c| c.description.clone()),
                })
            })
            .collect();
        let adjacency: Vec<String> = self
            .edges
            .iter()
            .filter(|(a, b, _)| names.contains(a) && names.contains(b))
            .map(|(a, b, l)| format!("{a} -> {b}: {l}"))
            .collect();
        let plot: Vec<Value> = block(req, "segment_summaries")
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| json!({"text": l.split_once("] ").map_or(l, |(_, t)| t)}))
            .collect();
        Some(json!({
            "synopsis": {
                "media_format": field_line(pad, "media_format").unwrap_or("other"),
                "setting": self.setting,
                "premise": self.premise,
                "plot_points": plot,
            },
            "characters": nodes,
            "adjacency": adjacency,
        }))
    }

    /// The annotation the story places at `t`.
    pub fn annotation_at(&self, t: Timestamp, duration: Timestamp, interval: Timestamp) -> Value {
        let half = Timestamp::from_millis(interval.as_millis() / 2);
        for m in &self.moments {
            let target = duration.scale(m.permille, 1000);
            if target.abs_diff(t) <= half && !(target < t && target.abs_diff(t) == half) {
                let heard = self.heard_name(&m.speaker);
                return json!({
                    "at": t.to_string(),
                    "dialogue": {"speaker": heard, "text": m.line},
                    "speech_act": m.speech_act,
                    "visual": m.visual,
                    "affect": {"emotion": m.emotion, "intensity": 0.8},
                    "boundary": true,
                });
            }
        }
        let idx = t.as_millis() / interval.as_millis().max(1);
        let h = mix(t.as_millis());
        let present: Vec<&StoryCharacter> = self
            .characters
            .iter()
            .filter(|c| self.introduced_at(c, duration) <= t)
            .collect();
        let visual = VISUALS[(h % VISUALS.len() as u64) as usize];
        let emotion = EMOTIONS[((h >> 8) % EMOTIONS.len() as u64) as usize];
        let intensity = ((h >> 16) % 9 + 1) as f64 / 10.0;
        let mut a = json!({
            "at": t.to_string(),
            "visual": visual,
            "affect": {"emotion": emotion, "intensity": intensity},
            "boundary": idx.is_multiple_of(7),
        });
        if idx % 4 != 3 && !present.is_empty() {
            let speaker = present[((h >> 40) as usize) % present.len()];
            let line = LINES[((h >> 24) % LINES.len() as u64) as usize];
            a["dialogue"] = json!({"speaker": self.heard_name(&speaker.name), "text": line});
            a["speech_act"] = json!(SPEECH_ACTS[((h >> 32) % SPEECH_ACTS.len() as u64) as usize]);
        }
        a
    }

    fn heard_name(&self, name: &str) -> String {
        match self.characters.iter().find(|c| c.name == name) {
            Some(c) if c.hidden => c.aliases.first().cloned().unwrap_or_else(|| c.name.clone()),
            _ => name.to_string(),
        }
    }

    fn scene(&self, req: &ProviderRequest<'_>, duration: Timestamp) -> Option<Value> {
        let scene = block(req, "scene");
        let range = parse_range_line(scene)?;
        let interval: Timestamp = field_line(scene, "interval")?.parse().ok()?;
        let mut t = range.start + Timestamp::from_millis(interval.as_millis() / 2);
        let mut annotations = Vec::new();
        while t < range.end {
            annotations.push(self.annotation_at(t, duration, interval));
            t = t + interval;
        }
        Some(json!({ "annotations": annotations }))
    }

    fn refine(&self, req: &ProviderRequest<'_>) -> Option<Value> {
        if let Some(digest) = req.block("scene_digest") {
            let points: Vec<Value> = digest
                .lines()
                .filter_map(|l| {
                    let (id, rest) = l.split_once(" range: ")?;
                    let (a, rest) = rest.split_once(" - ")?;
                    let (b, gist) = rest.split_once(": ")?;
                    let gist = gist.split(" / ").next().unwrap_or("");
                    Some(json!({
                        "text": format!("{id}: {gist}"),
                        "range": {"start": a.trim(), "end": b.trim()},
                    }))
                })
                .collect();
            let heard = block(req, "unresolved_speakers");
            let mut chars = Vec::new();
            let mut edges = Vec::new();
            for name in heard.lines().filter_map(|h| self.resolve(h)) {
                if let Some(c) = self.characters.iter().find(|c| c.name == name) {
                    chars.push(json!({"name": c.name, "aliases": c.aliases, "description": c.description}));
                    for (a, b, l) in self.edges.iter().filter(|(a, b, _)| a == name || b == name) {
                        edges.push(json!({"from": a, "to": b, "relationship": l}));
                    }
                }
            }
            return Some(json!({"plot_points": points, "characters": chars, "edges": edges}));
        }
        let scene = block(req, "scene");
        let graph = block(req, "character_graph");
        let attributions: Vec<Value> = scene
            .lines()
            .filter_map(|l| {
                let rest = l.strip_prefix("- ")?;
                let mut parts = rest.split(" | ");
                let at = parts.next()?.trim();
                let heard = parts.next()?.strip_prefix("heard: ")?.trim();
                let name = self.resolve(heard)?;
                graph.contains(&format!("{name}:")).then(|| json!({"at": at, "speaker": name}))
            })
            .collect();
        Some(json!({ "attributions": attributions }))
    }

    fn route(&self, req: &ProviderRequest<'_>) -> Option<Value> {
        let q = block(req, "question").to_lowercase();
        let visual = ["show", "find the", "see ", "clip", "moment"].iter().any(|w| q.contains(w));
        let rationale = if visual {
            "the user asks to see footage"
        } else {
            "a text answer from the index suffices"
        };
        Some(json!({"needs_visual": visual, "rationale": rationale}))
    }

    fn answer(&self, req: &ProviderRequest<'_>) -> Option<Value> {
        let question = content_tokens(block(req, "question"));
        let mut best: Option<(usize, Timestamp, String)> = None;
        for line in block(req, "index").lines() {
            let Some(rest) = line.strip_prefix("- ") else { continue };
            let Some((ts, text)) = rest.split_once(" | ") else { continue };
            let Ok(at) = ts.parse::<Timestamp>() else { continue };
            let words = content_tokens(text);
            let overlap = question.iter().filter(|q| words.contains(q)).count();
            if overlap > 0 && best.as_ref().is_none_or(|(o, _, _)| overlap > *o) {
                best = Some((overlap, at, text.to_string()));
            }
        }
        match best {
            Some((_, at, text)) => Some(json!({
                "answer": format!("At {at}: {text}"),
                "cited_timestamps": [at.to_string()],
                "grounded": true,
            })),
            _ => Some(json!({
                "answer": "The index does not contain that information.",
                "cited_timestamps": [],
                "grounded": false,
            })),
        }
    }

    fn reason(&self, req: &ProviderRequest<'_>) -> String {
        let prompt = block(req, "prompt");
        let focus = if prompt.to_lowercase().contains("antagonist") {
            format!("The retelling should follow {}, the antagonist, and frame events from his side.", self.antagonist())
        } else {
            format!("Keep {} at the center and follow the investigation in order.", self.protagonist())
        };
        format!("The request is: {prompt}. {focus} A somber, measured tone fits the material.")
    }

    fn storyboard(&self, req: &ProviderRequest<'_>) -> Option<Value> {
        let prompt = block(req, "prompt").to_lowercase();
        let graph = block(req, "character_graph");
        let lead = if prompt.contains("antagonist") && graph.contains(self.antagonist()) {
            self.antagonist()
        } else {
            self.protagonist()
        };
        let n = 2 + (hash_str(&prompt) % 3) as usize;
        let tones = ["somber", "tense", "hopeful", "triumphant"];
        let sections: Vec<Value> = (0..n)
            .map(|i| {
                json!({
                    "intent": format!("part {} of the story as {lead} sees it", i + 1),
                    "tone": tones[(i + hash_str(&prompt) as usize) % tones.len()],
                    "target_duration": 12 + 4 * ((hash_str(&prompt) as usize + i) % 3),
                    "ordering": if i % 2 == 0 { "chronological" } else { "thematic" },
                })
            })
            .collect();
        Some(json!({ "sections": sections }))
    }

    fn narrate(&self, req: &ProviderRequest<'_>) -> Option<Value> {
        let words = [
            "the", "harbor", "kept", "its", "secrets", "while", "the", "city", "slept", "and", "every",
            "ledger", "told", "a", "different", "story",
        ];
        let segments: Vec<Value> = block(req, "storyboard")
            .lines()
            .filter_map(|l| {
                let rest = l.strip_prefix("- ")?;
                let id = rest.split(" | ").next()?.trim().to_string();
                let target: Timestamp = rest
                    .split(" | ")
                    .find_map(|p| p.strip_prefix("target: "))?
                    .parse()
                    .ok()?;
                let count = (target.as_millis() * 5 / 2 / 1000).max(3) as usize;
                let mut text = String::new();
                for i in 0..count {
                    if i > 0 {
                        text.push(if i % 9 == 0 { ',' } else { ' ' });
                        if i % 9 == 0 {
                            text.push(' ');
                        }
                    }
                    text.push_str(words[(i + hash_str(&id) as usize) % words.len()]);
                }
                text.push('.');
                Some(json!({"section_id": id, "text": text}))
            })
            .collect();
        Some(json!({ "segments": segments }))
    }

    fn retrieve(&self, req: &ProviderRequest<'_>) -> Option<Value> {
        let narration = block(req, "narration");
        let id = field_line(narration, "narration_id")?;
        let want: Timestamp = field_line(narration, "duration")?.parse().ok()?;
        let mut windows: Vec<(TimeRange, String)> = Vec::new();
        let mut scene_end = Timestamp::ZERO;
        let mut pending: Option<(Timestamp, String)> = None;
        for line in block(req, "scenes").lines() {
            if let Some(header) = line.strip_prefix("## ") {
                if let Some((at, text)) = pending.take() {
                    if scene_end > at {
                        windows.push((TimeRange { start: at, end: scene_end }, text));
                    }
                }
                scene_end = parse_range_line(&header.replace(" | ", "\n"))?.end;
            } else if let Some(rest) = line.strip_prefix("- ") {
                let (ts, text) = rest.split_once(" | ")?;
                let at: Timestamp = ts.parse().ok()?;
                if let Some((prev, ptext)) = pending.take() {
                    windows.push((TimeRange { start: prev, end: at }, ptext));
                }
                pending = Some((at, text.to_string()));
            }
        }
        if let Some((at, text)) = pending {
            if scene_end > at {
                windows.push((TimeRange { start: at, end: scene_end }, text));
            }
        }
        if windows.is_empty() {
            return Some(json!({"clips": []}));
        }
        let target = want.scale(11, 10);
        let functions = ["exposition", "exposition", "emotionally salient dialogue", "montage"];
        let mut i = (hash_str(id) % windows.len() as u64) as usize;
        let mut total = Timestamp::ZERO;
        let mut clips = Vec::new();
        while total < target && clips.len() < windows.len() {
            let (mut r, text) = windows[i].clone();
            if r.len() > target - total {
                r.end = r.start + (target - total);
            }
            total = total + r.len();
            clips.push(json!({
                "start": r.start.to_string(),
                "end": r.end.to_string(),
                "justification": format!("shows {}", text.chars().take(60).collect::<String>()),
                "narrative_function": functions[(i + clips.len()) % functions.len()],
            }));
            i = (i + 1) % windows.len();
        }
        Some(json!({ "clips": clips }))
    }

    fn classify(&self, req: &ProviderRequest<'_>) -> Option<Value> {
        let f = field_line(block(req, "clip"), "narrative_function").unwrap_or("").to_lowercase();
        let mode = if f.contains("dialogue") {
            "raw_audio"
        } else if f.contains("montage") {
            "untrimmed"
        } else if f.contains("exposition") {
            "narrated_overlay"
        } else {
            "abstain"
        };
        Some(json!({ "mode": mode }))
    }

    fn music(&self, req: &ProviderRequest<'_>) -> Option<Value> {
        let tones: Vec<String> = block(req, "tones")
            .lines()
            .map(|l| l.trim().trim_start_matches("- ").to_string())
            .filter(|l| !l.is_empty())
            .collect();
        Some(json!({ "keywords": tones }))
    }
}

/// A project over synthetic media, with an orchestrator wired to the story
/// mock, a fixed clock and the null engine.
#[derive(Debug)]
pub struct StoryBench {
    pub orchestrator: Orchestrator,
    pub project: String,
    pub media_path: PathBuf,
    pub duration: Timestamp,
}

impl StoryBench {
    /// Writes the media under `root/media`, opens the store at `root/store`
    /// and ingests it as `project`.
    pub fn new(root: &Path, project: &str, duration: Timestamp, story: Story, config: PipelineConfig) -> Result<Self> {
        Self::with_mode(root, project, duration, story, config, ExecMode::default())
    }

    pub fn with_mode(
        root: &Path,
        project: &str,
        duration: Timestamp,
        story: Story,
        config: PipelineConfig,
        mode: ExecMode,
    ) -> Result<Self> {
        let media_dir = root.join("media");
        std::fs::create_dir_all(&media_dir)?;
        let media_path = media_dir.join(format!("{project}.json"));
        std::fs::write(&media_path, Story::media(duration).to_bytes())?;
        let store = ArtifactStore::open_fs(root.join("store"))?;
        let gateway = Gateway::new(Arc::new(story.provider(duration)), config.repair_attempts);
        let clock = Arc::new(FixedClock::epoch());
        create_project(&store, project, &[&media_path], &NullEngine, clock.as_ref())?;
        let services = Services {
            clock,
            config: config.clone(),
            mode,
            ..Services::new(store, gateway)
        };
        let orchestrator = Orchestrator::new(services).with_policy(RetryPolicy::new(config.retry_limit).immediate());
        Ok(Self {
            orchestrator,
            project: project.to_string(),
            media_path,
            duration,
        })
    }

    pub fn store(&self) -> &ArtifactStore {
        self.orchestrator.store()
    }

    /// Replaces the orchestrator with one over adjusted services, keeping
    /// the retry policy.
    pub fn rebuild(&mut self, adjust: impl FnOnce(&mut Services)) {
        let mut services = self.orchestrator.services().clone();
        adjust(&mut services);
        let policy = self.orchestrator.policy().clone();
        self.orchestrator = Orchestrator::new(services).with_policy(policy);
    }

    /// Adds a two-track music library with metronome beats and a synthetic
    /// transcript, so every plan transform runs.
    pub fn with_finishing(mut self) -> Result<Self> {
        let store = self.store().clone();
        let mut tracks = Vec::new();
        for (id, keywords) in [("nocturne", ["somber", "tense"]), ("daybreak", ["hopeful", "triumphant"])] {
            let audio = SyntheticMedia::audio(Timestamp::from_secs(600)).to_bytes();
            let r = store.put_artifact(&self.project, &ArtifactKind::new(format!("music-{id}"))?, &audio)?;
            tracks.push(MusicTrack {
                track_id: id.to_string(),
                uri: r.uri,
                keywords: keywords.iter().map(|k| k.to_string()).collect(),
            });
        }
        self.rebuild(|s| {
            s.music = Some(MusicManifest { tracks });
            s.beats = Some(Arc::new(MetronomeBeatDetector { bpm: 96 }));
            s.transcriber = Some(Arc::new(SyntheticTranscriber::default()));
        });
        Ok(self)
    }

    pub fn comprehend(&self, refine: bool) -> Result<WorkflowRecord> {
        let params = BTreeMap::from([("refine".to_string(), refine.to_string())]);
        self.orchestrator.run(&self.project, "comprehend", params)
    }

    pub fn ask(&self, question: &str) -> Result<WorkflowRecord> {
        let params = BTreeMap::from([("question".to_string(), question.to_string())]);
        self.orchestrator.run(&self.project, "qa", params)
    }

    pub fn edit(&self, prompt: &str) -> Result<WorkflowRecord> {
        let params = BTreeMap::from([("prompt".to_string(), prompt.to_string())]);
        self.orchestrator.run(&self.project, "edit", params)
    }

    /// Reads the workflow's result artifact.
    pub fn result<T: serde::de::DeserializeOwned>(&self, record: &WorkflowRecord) -> Result<T> {
        let r = record
            .result
            .as_ref()
            .ok_or_else(|| crate::Error::NotFound(format!("result of {}", record.workflow_id)))?;
        self.store().get_json(r)
    }
}
