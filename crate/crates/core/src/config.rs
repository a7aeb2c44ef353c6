//! Pipeline configuration. Every tunable number the pipeline uses lives here.

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use crate::time::Timestamp;
use crate::validate::ValidationReport;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Length of the overlapping coarse comprehension windows.
    pub macro_window: Timestamp,
    pub macro_overlap: Timestamp,
    /// Length of the non-overlapping fine-grained scene windows.
    pub scene_window: Timestamp,
    pub target_height: u32,
    pub target_fps: u32,
    pub annotation_interval: Timestamp,
    /// Token budget for the rolling scratchpad.
    pub scratchpad_budget: u64,
    pub repair_attempts: u32,
    pub retry_limit: u32,
    pub beat_snap_window: Timestamp,
    pub microcut_pad: Timestamp,
    pub refinement_enabled: bool,
    /// Token budget for the index prompt handed to question answering.
    pub qa_prompt_budget: u64,
    /// Encoder quality knob passed through to the media engine (`{quality}`).
    pub engine_quality: u32,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            macro_window: Timestamp::from_secs(900),
            macro_overlap: Timestamp::from_secs(60),
            scene_window: Timestamp::from_secs(300),
            target_height: 480,
            target_fps: 1,
            annotation_interval: Timestamp::from_secs(20),
            scratchpad_budget: 4000,
            repair_attempts: 2,
            retry_limit: 3,
            beat_snap_window: Timestamp::from_millis(500),
            microcut_pad: Timestamp::from_millis(150),
            refinement_enabled: true,
            qa_prompt_budget: 32_000,
            engine_quality: 28,
        }
    }
}

impl PipelineConfig {
    pub fn check(&self) -> ValidationReport {
        let mut report = ValidationReport::default();
        let positive = [
            ("macro_window", self.macro_window),
            ("macro_overlap", self.macro_overlap),
            ("scene_window", self.scene_window),
            ("annotation_interval", self.annotation_interval),
            ("beat_snap_window", self.beat_snap_window),
            ("microcut_pad", self.microcut_pad),
        ];
        for (field, value) in positive {
            if value == Timestamp::ZERO {
                report.push(field, "duration must be > 0");
            }
        }
        let counts = [
            ("target_height", u64::from(self.target_height)),
            ("target_fps", u64::from(self.target_fps)),
            ("scratchpad_budget", self.scratchpad_budget),
            ("repair_attempts", u64::from(self.repair_attempts)),
            ("retry_limit", u64::from(self.retry_limit)),
            ("qa_prompt_budget", self.qa_prompt_budget),
        ];
        for (field, value) in counts {
            if value == 0 {
                report.push(field, "count must be >= 1");
            }
        }
        if self.macro_overlap >= self.macro_window {
            report.push("macro_overlap", "must be smaller than macro_window");
        }
        if self.scene_window > self.macro_window {
            report.push("scene_window", "must not exceed macro_window");
        }
        if self.annotation_interval >= self.scene_window {
            report.push("annotation_interval", "must be smaller than scene_window");
        }
        report
    }

    /// Largest permitted gap between consecutive scene annotations.
    pub fn max_annotation_gap(&self) -> Timestamp {
        Timestamp::from_millis(self.annotation_interval.as_millis() * 3)
    }
}
