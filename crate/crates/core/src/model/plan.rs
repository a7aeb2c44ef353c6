use std::collections::{HashMap, HashSet};

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use super::SCHEMA_VERSION;
use crate::config::PipelineConfig;
use crate::time::{TimeRange, Timestamp};
use crate::validate::{Validate, ValidationReport};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct EditPlan {
    pub schema_version: u32,
    pub plan_id: String,
    pub prompt: String,
    /// Content hash of the storyboard the plan was compiled from.
    pub storyboard_ref: String,
    /// Source media the entries cut from.
    pub sources: Vec<SourceMedia>,
    pub entries: Vec<ClipSelection>,
    pub narration: Vec<NarrationSegment>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub music: Option<MusicRef>,
    pub meta: PlanMeta,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
pub struct SourceMedia {
    pub asset_id: String,
    pub uri: String,
    pub duration: Timestamp,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
pub struct MusicRef {
    pub track_id: String,
    pub uri: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct PlanMeta {
    pub index_hash: String,
    pub config: PipelineConfig,
    pub model: String,
    #[serde(default)]
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum RenderingMode {
    /// Muted video under the narration track.
    NarratedOverlay,
    /// Source audio kept, for dialogue that should be heard.
    RawAudio,
    /// Selection included whole with its audio, montage style.
    Untrimmed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
pub struct ClipSelection {
    pub asset_id: String,
    pub source: TimeRange,
    pub output_position: u32,
    pub justification: String,
    pub narrative_function: String,
    pub rendering_mode: RenderingMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub narration_id: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
pub struct NarrationSegment {
    pub narration_id: String,
    pub text: String,
    pub storyboard_section_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub audio_uri: Option<String>,
    /// Word-count estimate until synthesis, then the measured audio length.
    pub est_duration: Timestamp,
}

impl EditPlan {
    /// Entries' spans on the output timeline, in output order.
    pub fn output_ranges(&self) -> Vec<TimeRange> {
        let mut cursor = Timestamp::ZERO;
        self.entries
            .iter()
            .map(|e| {
                let start = cursor;
                cursor = cursor + e.source.len();
                TimeRange { start, end: cursor }
            })
            .collect()
    }

    pub fn total_duration(&self) -> Timestamp {
        self.entries.iter().map(|e| e.source.len()).sum()
    }

    /// Interior cut points on the output timeline (between consecutive entries).
    pub fn cut_points(&self) -> Vec<Timestamp> {
        let ranges = self.output_ranges();
        ranges.iter().take(ranges.len().saturating_sub(1)).map(|r| r.end).collect()
    }

    pub fn narration_duration(&self) -> Timestamp {
        self.narration.iter().map(|n| n.est_duration).sum()
    }

    /// Where each narration segment is audible on the output timeline: from the
    /// first entry bound to it, for its duration, cut off at the end of its
    /// last bound entry.
    pub fn narration_spans(&self) -> Vec<(String, TimeRange)> {
        let ranges = self.output_ranges();
        let mut spans = Vec::new();
        for n in &self.narration {
            let bound: Vec<&TimeRange> = self
                .entries
                .iter()
                .zip(&ranges)
                .filter(|(e, _)| e.narration_id.as_deref() == Some(n.narration_id.as_str()))
                .map(|(_, r)| r)
                .collect();
            let (Some(first), Some(last)) = (bound.first(), bound.last()) else {
                continue;
            };
            let end = (first.start + n.est_duration).min(last.end);
            if end > first.start {
                spans.push((
                    n.narration_id.clone(),
                    TimeRange {
                        start: first.start,
                        end,
                    },
                ));
            }
        }
        spans
    }

    pub fn source_duration(&self, asset_id: &str) -> Option<Timestamp> {
        self.sources.iter().find(|s| s.asset_id == asset_id).map(|s| s.duration)
    }
}

impl Validate for EditPlan {
    fn validate(&self) -> ValidationReport {
        let mut r = ValidationReport::default();
        if self.schema_version != SCHEMA_VERSION {
            r.push(
                "schema_version",
                format!("unsupported schema version {}", self.schema_version),
            );
        }
        let durations: HashMap<&str, Timestamp> = self
            .sources
            .iter()
            .map(|s| (s.asset_id.as_str(), s.duration))
            .collect();
        let mut narration_ids = HashSet::new();
        for (i, n) in self.narration.iter().enumerate() {
            if !narration_ids.insert(n.narration_id.as_str()) {
                r.push(format!("narration[{i}].narration_id"), "duplicate narration id");
            }
            if n.text.trim().is_empty() {
                r.push(format!("narration[{i}].text"), "narration text is empty");
            }
            if n.audio_uri.is_some() && n.est_duration == Timestamp::ZERO {
                r.push(
                    format!("narration[{i}].est_duration"),
                    "duration must be > 0 once audio exists",
                );
            }
        }
        for (i, e) in self.entries.iter().enumerate() {
            let path = format!("entries[{i}]");
            if e.output_position as usize != i {
                r.push(
                    format!("{path}.output_position"),
                    format!("expected contiguous output position {i}, found {}", e.output_position),
                );
            }
            if !e.source.is_well_formed() {
                r.push(format!("{path}.source"), "range start must precede end");
            }
            match durations.get(e.asset_id.as_str()) {
                None => r.push(
                    format!("{path}.asset_id"),
                    format!("unknown asset `{}`", e.asset_id),
                ),
                Some(d) if e.source.end > *d => r.push(
                    format!("{path}.source"),
                    format!("range {} exceeds media duration {d}", e.source),
                ),
                Some(_) => {}
            }
            match &e.narration_id {
                Some(id) if !narration_ids.contains(id.as_str()) => r.push(
                    format!("{path}.narration_id"),
                    format!("unknown narration segment `{id}`"),
                ),
                None if e.rendering_mode == RenderingMode::NarratedOverlay => r.push(
                    format!("{path}.narration_id"),
                    "narrated overlay clip requires a narration_id",
                ),
                _ => {}
            }
        }
        r
    }
}
