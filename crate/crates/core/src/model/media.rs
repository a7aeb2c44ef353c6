use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use crate::time::{TimeRange, Timestamp};
use crate::validate::{Validate, ValidationReport};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct MediaAsset {
    pub asset_id: String,
    /// Object-store path of the source container.
    pub uri: String,
    pub duration: Timestamp,
    pub width: u32,
    pub height: u32,
    pub fps: f64,
    pub has_audio: bool,
}

impl MediaAsset {
    pub fn full_range(&self) -> TimeRange {
        TimeRange {
            start: Timestamp::ZERO,
            end: self.duration,
        }
    }
}

impl Validate for MediaAsset {
    fn validate(&self) -> ValidationReport {
        let mut r = ValidationReport::default();
        if self.duration == Timestamp::ZERO {
            r.push("duration", "duration must be > 0");
        }
        if self.width == 0 || self.height == 0 {
            r.push("width", "dimensions must be > 0");
        }
        if !(self.fps.is_finite() && self.fps > 0.0) {
            r.push("fps", "frame rate must be > 0");
        }
        r
    }
}

/// A downsampled slice of a source asset prepared for model consumption.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct SegmentArtifact {
    pub uri: String,
    pub asset_id: String,
    /// The source range actually covered.
    pub range: TimeRange,
    pub width: u32,
    pub height: u32,
    pub fps: u32,
}

/// A project groups ingested media and everything derived from it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct Project {
    pub project_id: String,
    pub assets: Vec<MediaAsset>,
    /// Content hash of each asset's stored bytes, parallel to `assets`.
    pub media_hashes: Vec<String>,
    pub created_at: String,
}

impl Project {
    /// The asset that comprehension indexes.
    pub fn primary(&self) -> Option<&MediaAsset> {
        self.assets.first()
    }
}
