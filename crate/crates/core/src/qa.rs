//! Question answering over a narrative index.
//!
//! Answers are produced from a token-budgeted text rendering of the index and
//! must cite timestamps that exist in it. Retrieval is lexical: the Jaccard
//! overlap between query tokens and an annotation's text, compared exactly as
//! fractions.

use std::cmp::Ordering;
use std::collections::BTreeSet;

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use crate::comprehension::{range_line, synopsis_text};
use crate::config::PipelineConfig;
use crate::error::{Error, Result};
use crate::exec::{self, ExecMode};
use crate::gateway::{estimate_tokens, Gateway, ModelRequest, PromptKind, Rejection};
use crate::model::{ClipSelection, NarrativeIndex, RenderingMode, SceneTrace, SemanticAnnotation};
use crate::time::{TimeRange, Timestamp};
use crate::validate::{Validate, ValidationReport};

/// Citation tolerance around index anchors.
pub const CITATION_TOLERANCE: Timestamp = Timestamp::from_secs(2);
/// Evidence clips attached to visual answers.
pub const EVIDENCE_CLIPS: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct QaResponse {
    pub question: String,
    pub answer: String,
    pub cited_timestamps: Vec<Timestamp>,
    pub evidence_clips: Vec<ClipSelection>,
    pub grounded: bool,
    pub needs_visual: bool,
    pub rationale: String,
    #[serde(default)]
    pub warnings: Vec<String>,
}

impl QaResponse {
    /// Checks the groundedness invariant against `index`.
    pub fn check(&self, index: &NarrativeIndex) -> ValidationReport {
        let anchors = index.anchor_times();
        let mut r = ValidationReport::default();
        for (i, t) in self.cited_timestamps.iter().enumerate() {
            if !is_anchored(&anchors, *t) {
                r.push(
                    format!("cited_timestamps[{i}]"),
                    format!("{t} is not within 2 s of any annotation or scene boundary"),
                );
            }
        }
        if !self.grounded && !self.cited_timestamps.is_empty() {
            r.push("cited_timestamps", "ungrounded answers cite nothing");
        }
        r
    }
}

fn is_anchored(sorted_anchors: &[Timestamp], t: Timestamp) -> bool {
    let i = sorted_anchors.partition_point(|a| *a < t);
    [i.checked_sub(1), Some(i)]
        .into_iter()
        .flatten()
        .filter_map(|j| sorted_anchors.get(j))
        .any(|a| a.abs_diff(t) <= CITATION_TOLERANCE)
}

/// Lowercased alphanumeric tokens as a set.
pub fn token_set(text: &str) -> BTreeSet<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// Jaccard overlap as an exact fraction `shared / union`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Score {
    pub shared: u64,
    pub union: u64,
}

impl Score {
    pub const ZERO: Score = Score { shared: 0, union: 1 };

    pub fn between(query: &BTreeSet<String>, text: &BTreeSet<String>) -> Score {
        let shared = query.intersection(text).count() as u64;
        let union = query.union(text).count() as u64;
        if shared == 0 || union == 0 {
            Score::ZERO
        } else {
            Score { shared, union }
        }
    }

    pub fn is_zero(self) -> bool {
        self.shared == 0
    }
}

impl PartialOrd for Score {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Score {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.shared * other.union).cmp(&(other.shared * self.union))
    }
}

/// Prompt line for one annotation: `- <at> | <text fields>`.
pub fn annotation_line(a: &SemanticAnnotation) -> String {
    let mut fields = Vec::new();
    if let Some(d) = &a.dialogue {
        fields.push(format!("{}: \"{}\"", d.speaker, d.text));
    }
    if let Some(s) = &a.speech_act {
        fields.push(s.clone());
    }
    if let Some(v) = &a.visual {
        fields.push(v.clone());
    }
    if let Some(f) = &a.affect {
        fields.push(format!("{} ({:.1})", f.emotion, f.intensity));
    }
    if a.boundary {
        fields.push("cut".into());
    }
    format!("- {} | {}", a.at, fields.join(" | "))
}

pub fn scene_header(scene: &SceneTrace) -> String {
    format!("## scene {} | {}", scene.scene_id, range_line(&scene.range))
}

/// Full timestamped trace of a scene.
pub fn scene_text(scene: &SceneTrace) -> String {
    let mut out = scene_header(scene);
    out.push('\n');
    for a in &scene.annotations {
        out.push_str(&annotation_line(a));
        out.push('\n');
    }
    out
}

fn scene_stub(scene: &SceneTrace) -> String {
    format!(
        "{} | elided ({} annotations)\n",
        scene_header(scene),
        scene.annotations.len()
    )
}

fn index_header(index: &NarrativeIndex) -> String {
    format!(
        "# Synopsis\n{}\n# Characters\n{}\n# Scenes\n",
        synopsis_text(&index.synopsis),
        index.characters.adjacency_text()
    )
}

fn scene_relevance(scene: &SceneTrace, query: &BTreeSet<String>) -> Score {
    scene
        .annotations
        .iter()
        .map(|a| Score::between(query, &token_set(&a.text())))
        .max()
        .unwrap_or(Score::ZERO)
}

/// Renders the index within `budget` tokens.
///
/// Synopsis and character graph are always present. Every scene appears,
/// either as its full trace or as a one-line stub with its range. Full traces
/// are granted greedily by relevance to `query`, ties going to the newest
/// scene first.
pub fn format_index_prompt(index: &NarrativeIndex, budget: u64, query: Option<&str>) -> Result<String> {
    let header = index_header(index);
    let stubs: Vec<String> = index.scenes.iter().map(scene_stub).collect();
    let fulls: Vec<String> = index.scenes.iter().map(scene_text).collect();
    let chars = |s: &String| s.chars().count() as u64;
    let limit = budget.saturating_mul(4);
    let mut total = chars(&header) + stubs.iter().map(chars).sum::<u64>();
    if total > limit {
        return Err(Error::Budget(format!(
            "synopsis, graph and scene stubs need {} tokens, budget is {budget}",
            total.div_ceil(4)
        )));
    }
    let query = query.map(token_set).unwrap_or_default();
    let mut order: Vec<(Score, usize)> = index
        .scenes
        .iter()
        .enumerate()
        .map(|(i, s)| (scene_relevance(s, &query), i))
        .collect();
    order.sort_by(|a, b| {
        b.0.cmp(&a.0)
            .then_with(|| index.scenes[b.1].range.start.cmp(&index.scenes[a.1].range.start))
    });
    let mut full = vec![false; index.scenes.len()];
    for (_, i) in order {
        let grown = total - chars(&stubs[i]) + chars(&fulls[i]);
        if grown <= limit {
            total = grown;
            full[i] = true;
        }
    }
    let mut out = header;
    for (i, is_full) in full.iter().enumerate() {
        out.push_str(if *is_full { &fulls[i] } else { &stubs[i] });
    }
    debug_assert!(estimate_tokens(&out) <= budget);
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RouteDecision {
    pub needs_visual: bool,
    pub rationale: String,
    pub warning: Option<String>,
}

#[derive(Debug, Deserialize)]
struct RouteAnswer {
    needs_visual: bool,
    #[serde(default)]
    rationale: String,
}

/// Asks the model whether the question wants footage. Any gateway failure
/// degrades to a text-only answer with a warning.
pub fn needs_visual_evidence(question: &str, index: &NarrativeIndex, gateway: &Gateway) -> RouteDecision {
    let request = ModelRequest::new(PromptKind::QaRoute)
        .block("question", question)
        .block("synopsis", synopsis_text(&index.synopsis));
    match gateway.complete_json(&request, |r: RouteAnswer, _| Ok(r)) {
        Ok((r, _)) => RouteDecision {
            needs_visual: r.needs_visual,
            rationale: r.rationale,
            warning: None,
        },
        Err(e) => RouteDecision {
            needs_visual: false,
            rationale: String::new(),
            warning: Some(format!("visual routing unavailable, answering from text: {e}")),
        },
    }
}

struct Candidate {
    score: Score,
    at: Timestamp,
    range: TimeRange,
}

fn neighborhood(scene: &SceneTrace, i: usize) -> TimeRange {
    let start = if i == 0 { scene.range.start } else { scene.annotations[i - 1].at };
    let end = scene
        .annotations
        .get(i + 1)
        .map_or(scene.range.end, |a| a.at);
    TimeRange { start, end }
}

/// Ranks annotation neighborhoods by lexical relevance to `query`.
///
/// Sorted by descending score, ties by earlier timestamp. Zero-score
/// annotations are excluded. With a window, only annotations inside it are
/// considered and clips are clipped to it.
pub fn retrieve_clips(index: &NarrativeIndex, query: &str, window: Option<TimeRange>) -> Vec<ClipSelection> {
    retrieve_clips_with(ExecMode::default(), index, query, window)
}

pub fn retrieve_clips_with(
    mode: ExecMode,
    index: &NarrativeIndex,
    query: &str,
    window: Option<TimeRange>,
) -> Vec<ClipSelection> {
    let query = token_set(query);
    let slots: Vec<(usize, usize)> = index
        .scenes
        .iter()
        .enumerate()
        .flat_map(|(s, scene)| (0..scene.annotations.len()).map(move |a| (s, a)))
        .collect();
    let scored = exec::map(mode, &slots, |&(s, a)| {
        let scene = &index.scenes[s];
        let ann = &scene.annotations[a];
        if window.is_some_and(|w| !w.contains(ann.at)) {
            return None;
        }
        let score = Score::between(&query, &token_set(&ann.text()));
        if score.is_zero() {
            return None;
        }
        let mut range = neighborhood(scene, a);
        if let Some(w) = window {
            range.start = range.start.max(w.start);
            range.end = range.end.min(w.end);
        }
        (!range.is_empty()).then_some(Candidate { score, at: ann.at, range })
    });
    let mut hits: Vec<Candidate> = scored.into_iter().flatten().collect();
    hits.sort_by(|a, b| b.score.cmp(&a.score).then(a.at.cmp(&b.at)));
    hits.into_iter()
        .enumerate()
        .map(|(i, c)| ClipSelection {
            asset_id: index.meta.asset_id.clone(),
            source: c.range,
            output_position: i as u32,
            justification: format!(
                "annotation at {} shares {}/{} query tokens",
                c.at, c.score.shared, c.score.union
            ),
            narrative_function: "evidence".into(),
            rendering_mode: RenderingMode::RawAudio,
            narration_id: None,
        })
        .collect()
}

#[derive(Debug, Deserialize)]
struct AnswerDraft {
    answer: String,
    #[serde(default)]
    cited_timestamps: Vec<Timestamp>,
    grounded: bool,
}

/// Answers `question` from the index text, with cited timestamps that exist
/// in the index and, when footage is wanted, the top evidence clips.
pub fn answer(
    index: &NarrativeIndex,
    question: &str,
    gateway: &Gateway,
    config: &PipelineConfig,
) -> Result<QaResponse> {
    let question = question.trim();
    if question.is_empty() {
        return Err(Error::Precondition("question is empty".into()));
    }
    index.validate().into_result()?;
    let route = needs_visual_evidence(question, index, gateway);
    let prompt = format_index_prompt(index, config.qa_prompt_budget, Some(question))?;
    let anchors = index.anchor_times();
    let request = ModelRequest::new(PromptKind::QaAnswer)
        .block("index", prompt)
        .block("question", question);
    let (draft, _) = gateway.complete_json(&request, |d: AnswerDraft, _| {
        if d.answer.trim().is_empty() {
            return Err(Rejection::Retry("answer must be non-empty".into()));
        }
        if !d.grounded && !d.cited_timestamps.is_empty() {
            return Err(Rejection::Retry(
                "an answer marked ungrounded must not cite timestamps".into(),
            ));
        }
        if d.grounded && d.cited_timestamps.is_empty() {
            return Err(Rejection::Retry("a grounded answer must cite at least one timestamp".into()));
        }
        let stray: Vec<String> = d
            .cited_timestamps
            .iter()
            .filter(|t| !is_anchored(&anchors, **t))
            .map(ToString::to_string)
            .collect();
        if !stray.is_empty() {
            return Err(Rejection::Retry(format!(
                "cited timestamps {} do not match any annotation or scene boundary in the index",
                stray.join(", ")
            )));
        }
        Ok(d)
    })?;
    let evidence_clips = if route.needs_visual {
        retrieve_clips(index, question, None)
            .into_iter()
            .take(EVIDENCE_CLIPS)
            .collect()
    } else {
        Vec::new()
    };
    Ok(QaResponse {
        question: question.to_string(),
        answer: draft.answer.trim().to_string(),
        cited_timestamps: draft.cited_timestamps,
        evidence_clips,
        grounded: draft.grounded,
        needs_visual: route.needs_visual,
        rationale: route.rationale,
        warnings: route.warning.into_iter().collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn score_compares_fractions_exactly() {
        let a = Score { shared: 1, union: 3 };
        let b = Score { shared: 2, union: 6 };
        assert_eq!(a.cmp(&b), Ordering::Equal);
        assert!(Score { shared: 1, union: 2 } > a);
        assert!(Score::ZERO.is_zero());
    }

    #[test]
    fn anchored_within_two_seconds() {
        let anchors = [Timestamp::from_secs(10), Timestamp::from_secs(100)];
        assert!(is_anchored(&anchors, Timestamp::from_millis(12_000)));
        assert!(is_anchored(&anchors, Timestamp::from_millis(98_000)));
        assert!(!is_anchored(&anchors, Timestamp::from_millis(12_001)));
        assert!(!is_anchored(&[], Timestamp::ZERO));
    }
}
