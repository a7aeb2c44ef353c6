use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gateway::{Gateway, ModelRequest, PromptKind, Rejection};
use crate::model::{ClipSelection, NarrationSegment, NarrativeIndex, RenderingMode, SourceMedia};
use crate::qa::scene_text;
use crate::time::{TimeRange, Timestamp};

/// Lower bound of the footage-to-narration band, as a fraction.
pub const BAND_LOW: (u64, u64) = (4, 5);
/// Upper bound of the footage-to-narration band, as a fraction.
pub const BAND_HIGH: (u64, u64) = (3, 2);

/// Where `total` sits relative to the band around `narration`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Band {
    Under,
    Within,
    Over,
}

pub fn band(total: Timestamp, narration: Timestamp) -> Band {
    let (t, n) = (u128::from(total.as_millis()), u128::from(narration.as_millis()));
    if t * u128::from(BAND_LOW.1) < n * u128::from(BAND_LOW.0) {
        Band::Under
    } else if t * u128::from(BAND_HIGH.1) > n * u128::from(BAND_HIGH.0) {
        Band::Over
    } else {
        Band::Within
    }
}

pub fn band_limits(narration: Timestamp) -> (Timestamp, Timestamp) {
    let ms = narration.as_millis();
    let low = (ms * BAND_LOW.0).div_ceil(BAND_LOW.1);
    let high = ms * BAND_HIGH.0 / BAND_HIGH.1;
    (Timestamp::from_millis(low), Timestamp::from_millis(high))
}

#[derive(Debug, Deserialize)]
struct ClipDraft {
    start: Timestamp,
    end: Timestamp,
    #[serde(default)]
    justification: String,
    #[serde(default)]
    narrative_function: String,
}

#[derive(Debug, Deserialize)]
struct RetrievalAnswer {
    clips: Vec<ClipDraft>,
}

/// Selections for one narration segment plus any warnings raised while
/// fitting them into the duration band.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Retrieval {
    pub clips: Vec<ClipSelection>,
    pub warnings: Vec<String>,
}

const EMPTY: &str = "no clips selected";

/// Asks the model for footage that illustrates `segment`, then fits the total
/// into [0.8, 1.5] times the narration length.
pub fn retrieve_and_align(
    segment: &NarrationSegment,
    index: &NarrativeIndex,
    media: &SourceMedia,
    gateway: &Gateway,
) -> Result<Retrieval> {
    let narration_len = segment.est_duration;
    if narration_len == Timestamp::ZERO {
        return Err(Error::Precondition(format!(
            "narration {} has zero duration",
            segment.narration_id
        )));
    }
    let scenes: Vec<String> = index.scenes.iter().map(scene_text).collect();
    let request = ModelRequest::new(PromptKind::RetrieveClips)
        .block(
            "narration",
            format!(
                "narration_id: {}\nduration: {}\ntext: {}",
                segment.narration_id, narration_len, segment.text
            ),
        )
        .block("media", format!("asset_id: {}\nduration: {}", media.asset_id, media.duration))
        .block("scenes", scenes.join("\n\n"));
    let last = gateway.repair_attempts() + 1;
    let result = gateway.complete_json(&request, |a: RetrievalAnswer, attempt| {
        if a.clips.is_empty() {
            return Err(Rejection::Retry(EMPTY.into()));
        }
        let mut problems = Vec::new();
        for (i, c) in a.clips.iter().enumerate() {
            if c.start >= c.end {
                problems.push(format!("clips[{i}]: start {} must precede end {}", c.start, c.end));
            } else if c.end > media.duration {
                problems.push(format!("clips[{i}]: end {} exceeds media duration {}", c.end, media.duration));
            }
            if c.justification.trim().is_empty() {
                problems.push(format!("clips[{i}]: justification is empty"));
            }
            if c.narrative_function.trim().is_empty() {
                problems.push(format!("clips[{i}]: narrative_function is empty"));
            }
        }
        if !problems.is_empty() {
            return Err(Rejection::Retry(problems.join("; ")));
        }
        let total: Timestamp = a.clips.iter().map(|c| c.end - c.start).sum();
        let b = band(total, narration_len);
        // One re-prompt for the band; afterwards the selection is fitted in code.
        if b != Band::Within && attempt == 1 && attempt < last {
            let (lo, hi) = band_limits(narration_len);
            return Err(Rejection::Retry(format!(
                "selected footage totals {total}, outside the {lo} to {hi} band for narration of {narration_len}"
            )));
        }
        Ok(a.clips)
    });
    let drafts = match result {
        Ok((clips, _)) => clips,
        Err(Error::StructuredOutput { attempts, .. })
            if attempts.last().and_then(|a| a.error.as_deref()) == Some(EMPTY) =>
        {
            return Err(Error::Retrieval(segment.storyboard_section_id.clone()))
        }
        Err(e) => return Err(e),
    };
    let mut clips: Vec<ClipSelection> = drafts
        .into_iter()
        .map(|c| ClipSelection {
            asset_id: media.asset_id.clone(),
            source: TimeRange {
                start: c.start,
                end: c.end,
            },
            output_position: 0,
            justification: c.justification.trim().to_string(),
            narrative_function: c.narrative_function.trim().to_string(),
            rendering_mode: RenderingMode::NarratedOverlay,
            narration_id: Some(segment.narration_id.clone()),
        })
        .collect();
    let mut warnings = Vec::new();
    fit_to_band(&mut clips, narration_len, media.duration, &mut warnings)
        .map_err(|_| Error::Retrieval(segment.storyboard_section_id.clone()))?;
    Ok(Retrieval { clips, warnings })
}

/// Trims from the end when over the band; extends the final clip when under.
///
/// Fails when the media is too short to reach the lower bound.
pub fn fit_to_band(
    clips: &mut Vec<ClipSelection>,
    narration: Timestamp,
    media_duration: Timestamp,
    warnings: &mut Vec<String>,
) -> Result<()> {
    let total: Timestamp = clips.iter().map(|c| c.source.len()).sum();
    let (low, high) = band_limits(narration);
    match band(total, narration) {
        Band::Within => Ok(()),
        Band::Over => {
            let mut total = total;
            while let Some(last) = clips.last() {
                if total - last.source.len() >= high && clips.len() > 1 {
                    total = total - last.source.len();
                    clips.pop();
                } else {
                    break;
                }
            }
            if let Some(last) = clips.last_mut() {
                let excess = total.saturating_sub(high);
                last.source.end = last.source.end - excess;
            }
            warnings.push(format!("trimmed footage from {total} to {high} to stay within the duration band"));
            Ok(())
        }
        Band::Under => {
            let Some(last) = clips.last_mut() else {
                return Err(Error::Retrieval("empty selection".into()));
            };
            let mut missing = low - total;
            let grow = missing.min(media_duration.saturating_sub(last.source.end));
            last.source.end = last.source.end + grow;
            missing = missing - grow;
            let grow = missing.min(last.source.start);
            last.source.start = last.source.start - grow;
            missing = missing - grow;
            if missing > Timestamp::ZERO {
                return Err(Error::Retrieval(format!("media too short to cover {low}")));
            }
            warnings.push(format!("extended the final clip from {total} to {low} to stay within the duration band"));
            Ok(())
        }
    }
}

#[derive(Debug, Deserialize)]
struct ModeAnswer {
    mode: String,
}

/// Classifies how a clip is heard. Abstentions and failures fall back to a
/// narrated overlay.
pub fn assign_rendering_mode(clip: &ClipSelection, gateway: &Gateway) -> RenderingMode {
    let request = ModelRequest::new(PromptKind::ClassifyRenderingMode).block(
        "clip",
        format!(
            "range: {} - {}\nnarrative_function: {}\njustification: {}",
            clip.source.start, clip.source.end, clip.narrative_function, clip.justification
        ),
    );
    let mode = gateway.complete_json(&request, |a: ModeAnswer, _| Ok(a.mode));
    match mode.as_ref().map(|(m, _)| m.trim().to_lowercase()) {
        Ok(m) if m == "raw_audio" => RenderingMode::RawAudio,
        Ok(m) if m == "untrimmed" => RenderingMode::Untrimmed,
        _ => RenderingMode::NarratedOverlay,
    }
}
