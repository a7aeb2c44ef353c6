//! The three comprehension phases.
//!
//! 1. Coarse pass: macro segments are read in order, each interpreted against
//!    a rolling [`Scratchpad`] that is compressed whenever it outgrows its
//!    budget. The summaries and final scratchpad become a [`GlobalScaffold`].
//! 2. Scene pass: every scene window is annotated independently with the
//!    scaffold in context ([`comprehend_scene`]).
//! 3. Refinement: scene traces are reconciled with the scaffold, speakers are
//!    re-attributed and plot points are tied to time ranges
//!    ([`refine_index`]).
//!
//! The functions here are pure given their inputs and the gateway; the
//! orchestrator sequences them and persists the intermediate artifacts.

mod refine;
mod scaffold;
mod scene;
mod scratchpad;

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

pub use refine::{assemble_index, refine_index};
pub use scaffold::{build_global_scaffold, parse_adjacency_line, GlobalScaffold};
pub use scene::{comprehend_scene, SceneDraft, UnresolvedSpeaker};
pub use scratchpad::{bootstrap_scratchpad, comprehend_segment, compress_scratchpad, Scratchpad};

use crate::model::{GlobalSynopsis, MediaFormat, SegmentArtifact};
use crate::time::{TimeRange, Timestamp};

/// Coarse-pass summary of one macro segment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
pub struct SegmentSummary {
    pub range: TimeRange,
    pub text: String,
}

/// `range: <start> - <end>` line used in every context block that names a span.
pub fn range_line(range: &TimeRange) -> String {
    format!("range: {} - {}", range.start, range.end)
}

/// Finds and parses the first `range:` line in a context block.
pub fn parse_range_line(text: &str) -> Option<TimeRange> {
    let line = text.lines().find_map(|l| l.trim().strip_prefix("range:"))?;
    let (a, b) = line.split_once(" - ")?;
    Some(TimeRange {
        start: a.trim().parse().ok()?,
        end: b.trim().parse().ok()?,
    })
}

/// Value of the first `key: value` line in a context block.
pub fn field_line<'a>(text: &'a str, key: &str) -> Option<&'a str> {
    text.lines().find_map(|l| {
        l.trim()
            .strip_prefix(key)
            .and_then(|rest| rest.strip_prefix(':'))
            .map(str::trim)
    })
}

fn describe_segment(segment: &SegmentArtifact) -> String {
    format!(
        "{}\nresolution: {}x{} at {} fps",
        range_line(&segment.range),
        segment.width,
        segment.height,
        segment.fps
    )
}

fn describe_scene(segment: &SegmentArtifact, scene_id: &str, interval: Timestamp) -> String {
    format!(
        "scene_id: {scene_id}\n{}\ninterval: {interval}\nresolution: {}x{} at {} fps",
        range_line(&segment.range),
        segment.width,
        segment.height,
        segment.fps
    )
}

/// Synopsis as prompt text.
pub fn synopsis_text(s: &GlobalSynopsis) -> String {
    let mut out = format!(
        "format: {}\nsetting: {}\npremise: {}\nplot_points:\n",
        format_label(s.media_format),
        s.setting,
        s.premise
    );
    for p in &s.plot_points {
        match p.range {
            Some(r) => out.push_str(&format!("- {} ({} - {})\n", p.text, r.start, r.end)),
            None => out.push_str(&format!("- {}\n", p.text)),
        }
    }
    out
}

pub fn format_label(f: MediaFormat) -> &'static str {
    match f {
        MediaFormat::Cinematic => "cinematic",
        MediaFormat::Instructional => "instructional",
        MediaFormat::Keynote => "keynote",
        MediaFormat::Interview => "interview",
        MediaFormat::Sports => "sports",
        MediaFormat::Other => "other",
    }
}

/// Maps a free-form label onto [`MediaFormat`], case-insensitively.
pub(crate) fn lenient_format(label: &str) -> MediaFormat {
    serde_json::from_value(serde_json::Value::String(label.trim().to_lowercase()))
        .unwrap_or(MediaFormat::Other)
}
