//! Codec-free stand-in media used by the null engine.
//!
//! A synthetic container is a small JSON document tagged with
//! [`SYNTHETIC_FORMAT`] that declares the stream properties a real probe
//! would report. The null engine probes, "extracts" and "renders" these
//! without touching any codec.

use serde::{Deserialize, Serialize};

use crate::time::Timestamp;

pub const SYNTHETIC_FORMAT: &str = "reelmind-synthetic-media";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticMedia {
    pub format: String,
    pub duration: Timestamp,
    pub width: u32,
    pub height: u32,
    pub fps: f64,
    pub has_video: bool,
    pub has_audio: bool,
    /// Free-form label carried through extraction, e.g. the source range.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

impl SyntheticMedia {
    pub fn video(duration: Timestamp, width: u32, height: u32, fps: f64) -> Self {
        Self {
            format: SYNTHETIC_FORMAT.to_string(),
            duration,
            width,
            height,
            fps,
            has_video: true,
            has_audio: true,
            label: None,
        }
    }

    pub fn audio(duration: Timestamp) -> Self {
        Self {
            format: SYNTHETIC_FORMAT.to_string(),
            duration,
            width: 0,
            height: 0,
            fps: 0.0,
            has_video: false,
            has_audio: true,
            label: None,
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        crate::canonical::to_canonical_bytes(self).expect("synthetic media serializes")
    }

    /// Parses bytes as a synthetic container; `None` for anything else.
    pub fn parse(bytes: &[u8]) -> Option<Self> {
        serde_json::from_slice::<SyntheticMedia>(bytes)
            .ok()
            .filter(|m| m.format == SYNTHETIC_FORMAT)
    }
}

/// Width that keeps the aspect ratio at `height`, rounded to an even number.
pub fn scaled_width(width: u32, height: u32, target_height: u32) -> u32 {
    if height == 0 {
        return 0;
    }
    let w = (u64::from(width) * u64::from(target_height) + u64::from(height) / 2) / u64::from(height);
    let w = w as u32;
    (w + 1) & !1
}
