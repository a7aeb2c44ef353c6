use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use crate::comprehension::synopsis_text;
use crate::error::{Error, Result};
use crate::gateway::{Gateway, ModelRequest, PromptKind, Rejection};
use crate::model::{NarrationSegment, NarrativeIndex};
use crate::time::Timestamp;
use crate::validate::{Validate, ValidationReport};

/// Narration pace used for duration estimates before synthesis.
pub const WORDS_PER_SECOND_X10: u64 = 25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum SectionOrdering {
    Chronological,
    Thematic,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
pub struct StoryboardSection {
    pub section_id: String,
    pub intent: String,
    pub tone: String,
    pub target_duration: Timestamp,
    pub ordering: SectionOrdering,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
pub struct Storyboard {
    pub prompt: String,
    /// Freeform analysis from the first phase.
    pub reasoning: String,
    pub sections: Vec<StoryboardSection>,
}

impl Validate for Storyboard {
    fn validate(&self) -> ValidationReport {
        let mut r = ValidationReport::default();
        if self.sections.is_empty() {
            r.push("sections", "storyboard needs at least one section");
        }
        for (i, s) in self.sections.iter().enumerate() {
            if s.target_duration == Timestamp::ZERO {
                r.push(format!("sections[{i}].target_duration"), "duration must be > 0");
            }
            if s.intent.trim().is_empty() {
                r.push(format!("sections[{i}].intent"), "intent is empty");
            }
        }
        r
    }
}

impl Storyboard {
    /// One line per section, as handed to the narration prompt.
    pub fn outline(&self) -> String {
        self.sections
            .iter()
            .map(|s| {
                let ordering = match s.ordering {
                    SectionOrdering::Chronological => "chronological",
                    SectionOrdering::Thematic => "thematic",
                };
                format!(
                    "- {} | tone: {} | target: {} | ordering: {ordering} | intent: {}\n",
                    s.section_id, s.tone, s.target_duration, s.intent
                )
            })
            .collect()
    }

    pub fn tones(&self) -> Vec<&str> {
        self.sections.iter().map(|s| s.tone.as_str()).collect()
    }
}

#[derive(Debug, Deserialize)]
struct SectionDraft {
    intent: String,
    #[serde(default)]
    tone: String,
    target_duration: Timestamp,
    #[serde(default = "default_ordering")]
    ordering: SectionOrdering,
}

fn default_ordering() -> SectionOrdering {
    SectionOrdering::Chronological
}

#[derive(Debug, Deserialize)]
struct StoryboardDraft {
    sections: Vec<SectionDraft>,
}

/// Two-phase storyboard: freeform reasoning, then structuring.
pub fn plan_storyboard(index: &NarrativeIndex, prompt: &str, gateway: &Gateway) -> Result<Storyboard> {
    let prompt = prompt.trim();
    if prompt.is_empty() {
        return Err(Error::Precondition("editing prompt is empty".into()));
    }
    let graph = index.characters.adjacency_text();
    let reason = ModelRequest::new(PromptKind::StoryboardReason)
        .block("prompt", prompt)
        .block("synopsis", synopsis_text(&index.synopsis))
        .block("character_graph", &graph);
    let reasoning = gateway.complete(&reason)?.raw.trim().to_string();

    let structure = ModelRequest::new(PromptKind::StoryboardStructure)
        .block("prompt", prompt)
        .block("reasoning", &reasoning)
        .block("character_graph", &graph);
    let (sections, _) = gateway.complete_json(&structure, |d: StoryboardDraft, _| {
        let sections: Vec<StoryboardSection> = d
            .sections
            .into_iter()
            .enumerate()
            .map(|(i, s)| StoryboardSection {
                section_id: format!("sec{}", i + 1),
                intent: s.intent.trim().to_string(),
                tone: if s.tone.trim().is_empty() { "neutral".into() } else { s.tone.trim().to_lowercase() },
                target_duration: s.target_duration,
                ordering: s.ordering,
            })
            .collect();
        let candidate = Storyboard {
            prompt: String::new(),
            reasoning: String::new(),
            sections,
        };
        let report = candidate.validate();
        if report.is_empty() {
            Ok(candidate.sections)
        } else {
            Err(Rejection::Retry(report.to_string()))
        }
    })?;
    Ok(Storyboard {
        prompt: prompt.to_string(),
        reasoning,
        sections,
    })
}

/// Words divided by 2.5 words per second, in whole milliseconds.
pub fn estimate_narration(text: &str) -> Timestamp {
    let words = text.split_whitespace().count() as u64;
    Timestamp::from_millis(words * 10_000 / WORDS_PER_SECOND_X10)
}

#[derive(Debug, Deserialize)]
struct NarrationDraft {
    section_id: String,
    text: String,
}

#[derive(Debug, Deserialize)]
struct NarrationAnswer {
    segments: Vec<NarrationDraft>,
}

/// One voiceover segment per storyboard section, in order.
pub fn write_narration(storyboard: &Storyboard, gateway: &Gateway) -> Result<Vec<NarrationSegment>> {
    if storyboard.sections.is_empty() {
        return Err(Error::Precondition("storyboard has no sections".into()));
    }
    storyboard.validate().into_result()?;
    let request = ModelRequest::new(PromptKind::Narrate)
        .block("prompt", &storyboard.prompt)
        .block("storyboard", storyboard.outline());
    let expected: Vec<&str> = storyboard.sections.iter().map(|s| s.section_id.as_str()).collect();
    let (segments, _) = gateway.complete_json(&request, |a: NarrationAnswer, _| {
        let got: Vec<&str> = a.segments.iter().map(|s| s.section_id.trim()).collect();
        if got != expected {
            return Err(Rejection::Retry(format!(
                "expected one segment per section in order {expected:?}, got {got:?}"
            )));
        }
        if let Some(s) = a.segments.iter().find(|s| s.text.split_whitespace().next().is_none()) {
            return Err(Rejection::Retry(format!("narration for {} is empty", s.section_id)));
        }
        Ok(a.segments)
    })?;
    Ok(segments
        .into_iter()
        .enumerate()
        .map(|(i, s)| NarrationSegment {
            narration_id: format!("n{}", i + 1),
            est_duration: estimate_narration(&s.text),
            text: s.text.trim().to_string(),
            storyboard_section_id: s.section_id.trim().to_string(),
            audio_uri: None,
        })
        .collect())
}
