use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use crate::config::PipelineConfig;
use crate::error::{Error, Result};
use crate::time::{TimeRange, Timestamp};

/// Two-granularity decomposition of a media timeline.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
pub struct SegmentPlan {
    /// Overlapping coarse windows, consecutive pairs sharing exactly `macro_overlap`.
    pub macro_segments: Vec<TimeRange>,
    /// Non-overlapping fine windows that tile the timeline.
    pub scenes: Vec<TimeRange>,
}

/// Splits `[0, duration]` into overlapping macro segments and tiled scenes.
///
/// Macro segments advance by `macro_window - macro_overlap`; the last one is
/// cut at `duration` and may be shorter than the window.
pub fn plan_segments(duration: Timestamp, config: &PipelineConfig) -> Result<SegmentPlan> {
    if duration == Timestamp::ZERO {
        return Err(Error::EmptyMedia);
    }
    config.check().into_result()?;

    let window = config.macro_window;
    let stride = window - config.macro_overlap;
    let mut macro_segments = Vec::new();
    let mut start = Timestamp::ZERO;
    loop {
        let end = (start + window).min(duration);
        macro_segments.push(TimeRange { start, end });
        if end == duration {
            break;
        }
        start = start + stride;
    }

    let mut scenes = Vec::new();
    let mut start = Timestamp::ZERO;
    while start < duration {
        let end = (start + config.scene_window).min(duration);
        scenes.push(TimeRange { start, end });
        start = end;
    }

    Ok(SegmentPlan {
        macro_segments,
        scenes,
    })
}

/// Stable identifier for the `i`th scene window.
pub fn scene_id(i: usize) -> String {
    format!("s{:03}", i + 1)
}
